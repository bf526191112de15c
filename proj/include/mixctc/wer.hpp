#pragma once

#include <string>
#include <vector>

namespace mixctc::harness {

/// Levenshtein word edit distance between one reference and one hypothesis.
int edit_distance(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);

/// WER percent over parallel lists: total edits (substitutions + insertions
/// + deletions) divided by total reference words, times 100.
double evaluate_wer(const std::vector<std::vector<std::string>>& references,
                    const std::vector<std::vector<std::string>>& hypotheses);

}  // namespace mixctc::harness
