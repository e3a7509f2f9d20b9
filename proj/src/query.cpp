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

#include "relpool/query.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace relpool {

namespace {

std::vector<std::string> tokenize_lower(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!current.empty()) {
        tokens.push_back(current);
        current.clear();
      }
    } else {
      current.push_back(
          static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!current.empty()) tokens.push_back(current);
  return tokens;
}

std::string join(const std::vector<std::string>& tokens, std::size_t begin,
                 std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (!out.empty()) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> split_conjuncts(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  for (char ch : text) {
    if (ch == '&') {
      out.push_back(current);
      current.clear();
    } else {
      current.push_back(ch);
    }
  }
  out.push_back(current);
  return out;
}

}  // namespace

std::set<std::string> StructuredQuery::term_nouns() const {
  std::set<std::string> out(nouns.begin(), nouns.end());
  for (const SpatialTriplet& t : triplets) {
    out.insert(t.subject);
    out.insert(t.reference);
  }
  return out;
}

std::vector<std::string> PrepositionLexicon::default_prepositions() {
  return {"above",     "across from", "behind", "below",
          "in",        "in front of", "inside of", "left of",
          "on",        "right of",    "under"};
}

PrepositionLexicon::PrepositionLexicon(std::vector<std::string> prepositions) {
  if (prepositions.empty())
    throw ValidationError("preposition lexicon must be nonempty");
  for (std::string& p : prepositions) {
    const auto tokens = tokenize_lower(p);
    if (tokens.empty())
      throw ValidationError("preposition lexicon entry must be nonempty");
    p = join(tokens, 0, tokens.size());
  }
  std::sort(prepositions.begin(), prepositions.end());
  if (std::adjacent_find(prepositions.begin(), prepositions.end()) !=
      prepositions.end())
    throw ValidationError("preposition lexicon has duplicates");
  // Longest first (by token count), alphabetical within a length.
  std::stable_sort(prepositions.begin(), prepositions.end(),
                   [](const std::string& a, const std::string& b) {
                     const auto count = [](const std::string& s) {
                       return 1 + std::count(s.begin(), s.end(), ' ');
                     };
                     return count(a) > count(b);
                   });
  ordered_ = std::move(prepositions);
}

bool PrepositionLexicon::contains(const std::string& preposition) const {
  return std::find(ordered_.begin(), ordered_.end(), preposition) !=
         ordered_.end();
}

std::vector<std::string> PrepositionLexicon::sorted() const {
  std::vector<std::string> out = ordered_;
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

struct PrepositionMatch {
  std::size_t position = 0;  // token index where the preposition starts
  std::size_t length = 0;    // preposition token count
  std::string preposition;
  bool found = false;
};

// Leftmost match wins; at a given position the longest lexicon entry wins
// (ordered() is sorted by token count descending).
PrepositionMatch find_preposition(const std::vector<std::string>& tokens,
                                  const PrepositionLexicon& lexicon) {
  std::vector<std::vector<std::string>> entries;
  for (const std::string& p : lexicon.ordered())
    entries.push_back(tokenize_lower(p));
  for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
    for (std::size_t e = 0; e < entries.size(); ++e) {
      const auto& entry = entries[e];
      if (pos + entry.size() > tokens.size()) continue;
      if (std::equal(entry.begin(), entry.end(), tokens.begin() + pos))
        return {pos, entry.size(), lexicon.ordered()[e], true};
    }
  }
  return {};
}

}  // namespace

StructuredQuery parse_query(const std::string& text,
                            const PrepositionLexicon& lexicon,
                            const std::string& id) {
  StructuredQuery q;
  q.id = id;
  const auto conjuncts = split_conjuncts(text);
  bool any_term = false;
  for (std::size_t ci = 0; ci < conjuncts.size(); ++ci) {
    const auto tokens = tokenize_lower(conjuncts[ci]);
    if (tokens.empty()) throw ParseError(ci, "empty conjunct");
    any_term = true;
    const PrepositionMatch match = find_preposition(tokens, lexicon);
    if (!match.found) {
      // "x of"/"x from" look like relation candidates outside the lexicon.
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] == "of" || tokens[i] == "from") {
          if (i == 0) throw ParseError(ci, "conjunct starts with '" + tokens[i] + "'");
          throw UnknownPreposition(tokens[i - 1] + " " + tokens[i]);
        }
      }
      q.nouns.push_back(join(tokens, 0, tokens.size()));
      continue;
    }
    if (match.position == 0)
      throw ParseError(ci, "missing subject before '" + match.preposition + "'");
    if (match.position + match.length >= tokens.size())
      throw ParseError(ci, "missing reference after '" + match.preposition + "'");
    SpatialTriplet t;
    t.subject = join(tokens, 0, match.position);
    t.preposition = match.preposition;
    t.reference = join(tokens, match.position + match.length, tokens.size());
    q.triplets.push_back(std::move(t));
  }
  if (!any_term) throw ParseError(0, "query has no terms");
  return q;
}

std::string serialize_query(const StructuredQuery& q) {
  std::string out;
  const auto append = [&out](const std::string& part) {
    if (!out.empty()) out += " & ";
    out += part;
  };
  for (const SpatialTriplet& t : q.triplets)
    append(t.subject + " " + t.preposition + " " + t.reference);
  for (const std::string& n : q.nouns) append(n);
  return out;
}

std::vector<std::string> validate_query(const StructuredQuery& q,
                                        const std::set<std::string>& vocab) {
  std::vector<std::string> warnings;
  for (const std::string& noun : q.term_nouns())
    if (vocab.count(noun) == 0)
      warnings.push_back("noun '" + noun + "' not in corpus vocabulary");
  return warnings;
}

std::vector<StructuredQuery> load_queries(const std::string& path,
                                          const PrepositionLexicon& lexicon) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open query file '" + path + "'");
  std::vector<StructuredQuery> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError(line_no, "expected \"ID<TAB>query text\"");
    out.push_back(parse_query(line.substr(tab + 1), lexicon, line.substr(0, tab)));
  }
  return out;
}

void save_queries(const std::vector<StructuredQuery>& queries,
                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write query file '" + path + "'");
  for (const StructuredQuery& q : queries)
    out << q.id << "\t" << serialize_query(q) << "\n";
  if (!out) throw IoError("failed writing query file '" + path + "'");
}

}  // namespace relpool
