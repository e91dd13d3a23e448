#include "radifusion/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "radifusion/error.hpp"

namespace radif {

const char* view_name(View v) {
    switch (v) {
        case View::LCC: return "LCC";
        case View::RCC: return "RCC";
        case View::LMLO: return "LMLO";
        default: return "RMLO";
    }
}

View view_from_name(const std::string& name) {
    if (name == "LCC") return View::LCC;
    if (name == "RCC") return View::RCC;
    if (name == "LMLO") return View::LMLO;
    if (name == "RMLO") return View::RMLO;
    throw Error::validation("unknown view name '" + name + "' (expected LCC, RCC, LMLO or RMLO)");
}

bool view_is_left(View v) { return v == View::LCC || v == View::LMLO; }
bool view_is_cc(View v) { return v == View::LCC || v == View::RCC; }

OtsuResult otsu_segment(const Tensor& img, int n_levels) {
    if (img.rank() != 2) throw Error::validation("otsu_segment expects an [H,W] image, got " + shape_str(img.shape()));
    if (n_levels < 2) throw Error::validation("otsu_segment needs at least 2 histogram levels");
    const int h = img.dim(0), w = img.dim(1);
    const std::int64_t n = img.size();
    double lo = img[0], hi = img[0];
    for (std::int64_t i = 0; i < n; ++i) {
        if (!std::isfinite(img[i])) throw Error::validation("otsu_segment input contains non-finite pixels");
        lo = std::min(lo, img[i]);
        hi = std::max(hi, img[i]);
    }
    if (hi == lo) throw Error::validation("otsu_segment input is constant; cannot segment");

    const int L = n_levels;
    std::vector<std::int64_t> hist(static_cast<std::size_t>(L), 0);
    const double width = (hi - lo) / L;
    for (std::int64_t i = 0; i < n; ++i) {
        int b = static_cast<int>((img[i] - lo) / width);
        b = std::clamp(b, 0, L - 1);
        ++hist[static_cast<std::size_t>(b)];
    }

    // between-class variance w0*w1*(mu0-mu1)^2 maximized over split s
    // (class 0 = bins < s); ties resolved toward the lowest s
    std::vector<double> cum_n(static_cast<std::size_t>(L) + 1, 0.0), cum_x(static_cast<std::size_t>(L) + 1, 0.0);
    for (int b = 0; b < L; ++b) {
        cum_n[static_cast<std::size_t>(b) + 1] = cum_n[static_cast<std::size_t>(b)] + static_cast<double>(hist[static_cast<std::size_t>(b)]);
        cum_x[static_cast<std::size_t>(b) + 1] = cum_x[static_cast<std::size_t>(b)] + static_cast<double>(hist[static_cast<std::size_t>(b)]) * b;
    }
    int best_s = 1;
    double best_v = -1.0;
    for (int s = 1; s < L; ++s) {
        const double n0 = cum_n[static_cast<std::size_t>(s)];
        const double n1 = cum_n[static_cast<std::size_t>(L)] - n0;
        if (n0 == 0.0 || n1 == 0.0) continue;
        const double mu0 = cum_x[static_cast<std::size_t>(s)] / n0;
        const double mu1 = (cum_x[static_cast<std::size_t>(L)] - cum_x[static_cast<std::size_t>(s)]) / n1;
        const double v = n0 * n1 * (mu0 - mu1) * (mu0 - mu1);
        if (v > best_v) {
            best_v = v;
            best_s = s;
        }
    }
    const double threshold = lo + best_s * width;

    // strict > threshold, then keep only the largest 4-connected component
    std::vector<char> fg(static_cast<std::size_t>(n), 0);
    for (std::int64_t i = 0; i < n; ++i) fg[static_cast<std::size_t>(i)] = img[i] > threshold ? 1 : 0;

    std::vector<int> label(static_cast<std::size_t>(n), -1);
    int best_label = -1;
    std::int64_t best_size = 0;
    int next_label = 0;
    std::vector<std::int64_t> stack;
    for (std::int64_t start = 0; start < n; ++start) {
        if (!fg[static_cast<std::size_t>(start)] || label[static_cast<std::size_t>(start)] >= 0) continue;
        std::int64_t count = 0;
        stack.push_back(start);
        label[static_cast<std::size_t>(start)] = next_label;
        while (!stack.empty()) {
            const std::int64_t p = stack.back();
            stack.pop_back();
            ++count;
            const int y = static_cast<int>(p / w), x = static_cast<int>(p % w);
            const int dy[4] = {-1, 1, 0, 0}, dx[4] = {0, 0, -1, 1};
            for (int k = 0; k < 4; ++k) {
                const int ny = y + dy[k], nx = x + dx[k];
                if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                const std::int64_t q = static_cast<std::int64_t>(ny) * w + nx;
                if (fg[static_cast<std::size_t>(q)] && label[static_cast<std::size_t>(q)] < 0) {
                    label[static_cast<std::size_t>(q)] = next_label;
                    stack.push_back(q);
                }
            }
        }
        if (count > best_size) { // first-found wins ties (row-major scan order)
            best_size = count;
            best_label = next_label;
        }
        ++next_label;
    }

    OtsuResult out;
    out.threshold = threshold;
    out.mask = Tensor({h, w});
    out.segmented = Tensor({h, w});
    for (std::int64_t i = 0; i < n; ++i) {
        if (label[static_cast<std::size_t>(i)] == best_label && best_label >= 0) {
            out.mask[i] = 1.0;
            out.segmented[i] = img[i];
        }
    }
    return out;
}

Tensor resize_pad(const Tensor& img, int target) {
    if (img.rank() != 2) throw Error::validation("resize_pad expects an [H,W] image, got " + shape_str(img.shape()));
    if (target < 1) throw Error::validation("resize_pad target must be positive");
    const int h = img.dim(0), w = img.dim(1);
    int nh, nw;
    if (h >= w) {
        nh = target;
        nw = std::max(1, static_cast<int>(std::lround(static_cast<double>(w) * target / h)));
    } else {
        nw = target;
        nh = std::max(1, static_cast<int>(std::lround(static_cast<double>(h) * target / w)));
    }

    // bilinear with half-pixel centers: src = (dst + 0.5) * in/out - 0.5,
    // which is an exact identity when in == out
    Tensor resized({nh, nw});
    const double sy = static_cast<double>(h) / nh;
    const double sx = static_cast<double>(w) / nw;
    for (int y = 0; y < nh; ++y) {
        const double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        const double ty = fy - y0;
        const int y1 = std::clamp(y0 + 1, 0, h - 1);
        y0 = std::clamp(y0, 0, h - 1);
        for (int x = 0; x < nw; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            const double tx = fx - x0;
            const int x1 = std::clamp(x0 + 1, 0, w - 1);
            x0 = std::clamp(x0, 0, w - 1);
            const double a = img[static_cast<std::int64_t>(y0) * w + x0];
            const double b = img[static_cast<std::int64_t>(y0) * w + x1];
            const double c = img[static_cast<std::int64_t>(y1) * w + x0];
            const double d = img[static_cast<std::int64_t>(y1) * w + x1];
            resized[static_cast<std::int64_t>(y) * nw + x] =
                (1.0 - ty) * ((1.0 - tx) * a + tx * b) + ty * ((1.0 - tx) * c + tx * d);
        }
    }

    if (nh == target && nw == target) return resized;
    Tensor out({target, target});
    const int pad_y = (target - nh) / 2; // extra pixel trails
    const int pad_x = (target - nw) / 2;
    for (int y = 0; y < nh; ++y)
        for (int x = 0; x < nw; ++x)
            out[static_cast<std::int64_t>(y + pad_y) * target + (x + pad_x)] =
                resized[static_cast<std::int64_t>(y) * nw + x];
    return out;
}

NormalizationStats compute_stats(const std::vector<Tensor>& training_images, int fold_id) {
    if (training_images.empty()) throw Error::validation("compute_stats needs a non-empty training set");
    double sum = 0.0;
    std::int64_t count = 0;
    for (const Tensor& img : training_images) {
        for (std::int64_t i = 0; i < img.size(); ++i) sum += img[i];
        count += img.size();
    }
    const double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (const Tensor& img : training_images)
        for (std::int64_t i = 0; i < img.size(); ++i) ss += (img[i] - mean) * (img[i] - mean);
    const double var = ss / static_cast<double>(count);
    NormalizationStats stats;
    stats.mean = mean;
    stats.std_dev = std::sqrt(var);
    stats.fold_id = fold_id;
    if (stats.std_dev == 0.0) throw Error::validation("training pixels have zero variance; cannot normalize");
    return stats;
}

Tensor normalize(const Tensor& img, const NormalizationStats& stats) {
    if (stats.std_dev <= 0.0) throw Error::validation("normalization std must be positive");
    Tensor out(img.shape());
    for (std::int64_t i = 0; i < img.size(); ++i) out[i] = (img[i] - stats.mean) / stats.std_dev;
    return out;
}

Tensor denormalize(const Tensor& img, const NormalizationStats& stats) {
    Tensor out(img.shape());
    for (std::int64_t i = 0; i < img.size(); ++i) out[i] = img[i] * stats.std_dev + stats.mean;
    return out;
}

Tensor stack_screenings(const std::vector<Tensor>& frames, int T, HistoryFill fill) {
    if (frames.empty()) throw Error::validation("stack_screenings needs at least one screening");
    if (T < 1) throw Error::validation("stack_screenings frame count must be >= 1");
    const int h = frames[0].dim(0), w = frames[0].dim(1);
    for (const Tensor& f : frames)
        if (f.rank() != 2 || f.dim(0) != h || f.dim(1) != w)
            throw Error::validation("stack_screenings frames must share one [H,W] shape");
    Tensor out({T, h, w});
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    for (int t = 0; t < T; ++t) {
        const Tensor& src = t < static_cast<int>(frames.size())
                                ? frames[static_cast<std::size_t>(t)]
                                : (fill == HistoryFill::oldest_available ? frames.back() : frames.front());
        for (std::int64_t i = 0; i < plane; ++i) out[t * plane + i] = src[i];
    }
    return out;
}

} // namespace radif
