#pragma once

#include <set>
#include <string>
#include <vector>

namespace memaudit::textnorm {

/// Analyzer shared by indexing, retrieval, sentence vectors and the lexical
/// paraphrase scorer: ASCII letters are lowercased, digits kept, any other
/// ASCII character acts as a separator, non-ASCII code points pass through.
/// Applied identically at index and query time.
std::vector<std::string> normalize_terms(const std::string& text);

std::set<std::string> term_set(const std::string& text);

}  // namespace memaudit::textnorm
