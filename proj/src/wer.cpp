#include "mixctc/wer.hpp"

#include <algorithm>
#include <stdexcept>

namespace mixctc::harness {

int edit_distance(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  const size_t n = ref.size(), m = hyp.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= m; ++j) {
      const int sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double evaluate_wer(const std::vector<std::vector<std::string>>& references,
                    const std::vector<std::vector<std::string>>& hypotheses) {
  if (references.size() != hypotheses.size()) {
    throw std::invalid_argument("evaluate_wer: reference and hypothesis counts differ");
  }
  if (references.empty()) throw std::invalid_argument("evaluate_wer: empty reference set");
  long edits = 0, ref_words = 0;
  for (size_t i = 0; i < references.size(); ++i) {
    edits += edit_distance(references[i], hypotheses[i]);
    ref_words += static_cast<long>(references[i].size());
  }
  if (ref_words == 0) throw std::invalid_argument("evaluate_wer: references contain no words");
  return 100.0 * static_cast<double>(edits) / static_cast<double>(ref_words);
}

}  // namespace mixctc::harness
