// Copyright 2026 The relpool authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <set>
#include <string>
#include <vector>

#include "relpool/errors.hpp"

namespace relpool {

// (subject, preposition, reference): "picture above bed" places the picture
// relative to the bed.
struct SpatialTriplet {
  std::string subject;
  std::string preposition;
  std::string reference;

  bool operator==(const SpatialTriplet&) const = default;
};

// A conjunction of bare nouns and spatial triplets. The textual form joins
// conjuncts with "&": "picture above bed & lamp".
struct StructuredQuery {
  std::string id;
  std::vector<std::string> nouns;
  std::vector<SpatialTriplet> triplets;

  // All nouns mentioned anywhere in the query (bare nouns plus triplet
  // endpoints), deduplicated.
  std::set<std::string> term_nouns() const;

  bool operator==(const StructuredQuery&) const = default;
};

// The multiword prepositions the parser recognizes, kept in longest-match
// order (token count descending) so "in front of" wins over "in".
class PrepositionLexicon {
 public:
  PrepositionLexicon() : PrepositionLexicon(default_prepositions()) {}
  explicit PrepositionLexicon(std::vector<std::string> prepositions);

  bool contains(const std::string& preposition) const;
  const std::vector<std::string>& ordered() const { return ordered_; }
  std::vector<std::string> sorted() const;  // alphabetical, for display/keys

  static std::vector<std::string> default_prepositions();

 private:
  std::vector<std::string> ordered_;
};

// Parses "noun+ | noun+ preposition noun+ (& ...)*". Nouns are lowercased and
// whitespace-normalized; multiword nouns are allowed (greedy: everything
// before the matched preposition is the subject, everything after the
// reference). Throws ParseError (conjunct index) for malformed conjuncts and
// UnknownPreposition for relation-shaped word pairs outside the lexicon.
StructuredQuery parse_query(const std::string& text,
                            const PrepositionLexicon& lexicon,
                            const std::string& id = "");

// Canonical text form; parse_query(serialize_query(q)) == q for valid q.
std::string serialize_query(const StructuredQuery& q);

// One warning per distinct query noun absent from the vocabulary.
std::vector<std::string> validate_query(const StructuredQuery& q,
                                        const std::set<std::string>& vocab);

// Query files hold one query per line: "ID<TAB>query text".
std::vector<StructuredQuery> load_queries(const std::string& path,
                                          const PrepositionLexicon& lexicon);
void save_queries(const std::vector<StructuredQuery>& queries,
                  const std::string& path);

}  // namespace relpool
