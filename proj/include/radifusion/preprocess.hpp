#pragma once

#include <string>
#include <vector>

#include "radifusion/tensor.hpp"

namespace radif {

// The four standard mammographic projections.
enum class View { LCC = 0, RCC = 1, LMLO = 2, RMLO = 3 };

constexpr int kNumViews = 4;
const char* view_name(View v);
View view_from_name(const std::string& name);
bool view_is_left(View v);  // LCC / LMLO
bool view_is_cc(View v);    // LCC / RCC

struct OtsuResult {
    double threshold = 0.0;
    Tensor mask;      // [H,W] of 0/1
    Tensor segmented; // img with everything outside the mask set to 0
};

// Histogram-based foreground segmentation: the threshold maximizes
// between-class variance over n_levels equal-width bins spanning
// [min, max] (ties -> lowest split); the mask keeps pixels strictly above
// the threshold, restricted to the largest 4-connected component.
OtsuResult otsu_segment(const Tensor& img, int n_levels = 256);

// Bilinear resize so the longer side equals target (aspect preserved),
// then symmetric zero padding of the shorter side, extra pixel trailing.
Tensor resize_pad(const Tensor& img, int target = 256);

struct NormalizationStats {
    double mean = 0.0;
    double std_dev = 1.0;
    int fold_id = -1;
};

// Scalar mean / population standard deviation over every pixel of every
// image in the training fold.
NormalizationStats compute_stats(const std::vector<Tensor>& training_images, int fold_id = -1);
Tensor normalize(const Tensor& img, const NormalizationStats& stats);
Tensor denormalize(const Tensor& img, const NormalizationStats& stats);

// Which frame fills missing history slots when a patient has fewer than T
// screenings: the oldest available prior (temporal change frozen at zero)
// or the current exam.
enum class HistoryFill { oldest_available, current };

// Frames ordered most-recent-first; output is [T,H,W] with frame 0 = most
// recent. Lists longer than T are truncated to the T most recent.
Tensor stack_screenings(const std::vector<Tensor>& frames_most_recent_first, int T,
                        HistoryFill fill = HistoryFill::oldest_available);

} // namespace radif
