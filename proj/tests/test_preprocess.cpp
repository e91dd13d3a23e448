#include <cmath>

#include "doctest.h"
#include "radifusion/error.hpp"
#include "radifusion/preprocess.hpp"
#include "radifusion/rng.hpp"

using namespace radif;

namespace {

// bright half-ellipse on a dark noisy background, optional corner label
Tensor blob_image(Rng& rng, int h, int w, bool corner_label) {
    Tensor img({h, w});
    const double cy = h * 0.5, cx = w * 0.35, ry = h * 0.38, rx = w * 0.3;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double dy = (y - cy) / ry, dx = (x - cx) / rx;
            double v = 0.02 + 0.01 * rng.uniform();
            if (dy * dy + dx * dx <= 1.0) v = 0.55 + 0.1 * rng.uniform();
            img[static_cast<std::int64_t>(y) * w + x] = v;
        }
    if (corner_label)
        for (int y = 1; y < 4; ++y)
            for (int x = w - 5; x < w - 1; ++x) img[static_cast<std::int64_t>(y) * w + x] = 1.0;
    return img;
}

} // namespace

TEST_CASE("otsu splits a two-valued image exactly") {
    const int h = 10, w = 10;
    Tensor img({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img[y * w + x] = y < 5 ? 0.0 : 255.0;
    OtsuResult r = otsu_segment(img);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            CHECK(r.mask[y * w + x] == (y < 5 ? 0.0 : 1.0));
            CHECK(r.segmented[y * w + x] == (y < 5 ? 0.0 : 255.0));
        }
    CHECK(r.threshold > 0.0);
    CHECK(r.threshold < 255.0);
}

TEST_CASE("otsu rejects constant images") {
    CHECK_THROWS_AS(otsu_segment(Tensor::full({8, 8}, 3.0)), Error);
}

TEST_CASE("largest-component rule removes a bright corner label") {
    Rng rng(17);
    Tensor img = blob_image(rng, 40, 40, true);
    OtsuResult r = otsu_segment(img);
    // corner label pixels must be gone
    for (int y = 1; y < 4; ++y)
        for (int x = 35; x < 39; ++x) CHECK(r.mask[y * 40 + x] == 0.0);
    // blob center must stay
    CHECK(r.mask[20 * 40 + 14] == 1.0);
}

TEST_CASE("otsu segmentation is idempotent on its own output") {
    Rng rng(23);
    for (int iter = 0; iter < 10; ++iter) {
        Tensor img = blob_image(rng, 32, 32, iter % 2 == 0);
        OtsuResult r1 = otsu_segment(img);
        OtsuResult r2 = otsu_segment(r1.segmented);
        for (std::int64_t i = 0; i < r1.mask.size(); ++i) CHECK(r1.mask[i] == r2.mask[i]);
    }
}

TEST_CASE("resize_pad keeps same-size input bit-identical") {
    Rng rng(31);
    Tensor img({64, 64});
    for (std::int64_t i = 0; i < img.size(); ++i) img[i] = rng.uniform();
    Tensor out = resize_pad(img, 64);
    for (std::int64_t i = 0; i < img.size(); ++i) CHECK(out[i] == img[i]);
}

TEST_CASE("resize_pad geometry: landscape, portrait, odd pad split") {
    // 512x256 -> content 256x128 centered horizontally
    Tensor img = Tensor::full({512, 256}, 1.0);
    Tensor out = resize_pad(img, 256);
    REQUIRE(out.shape() == std::vector<int>{256, 256});
    int min_x = 256, max_x = -1;
    for (int y = 0; y < 256; ++y)
        for (int x = 0; x < 256; ++x)
            if (out[y * 256 + x] != 0.0) {
                min_x = std::min(min_x, x);
                max_x = std::max(max_x, x);
            }
    CHECK(min_x == 64);
    CHECK(max_x == 191);

    // 100x300 -> content rows 85, pad 85 leading / 86 trailing
    Tensor img2 = Tensor::full({100, 300}, 1.0);
    Tensor out2 = resize_pad(img2, 256);
    int min_y = 256, max_y = -1;
    for (int y = 0; y < 256; ++y)
        for (int x = 0; x < 256; ++x)
            if (out2[y * 256 + x] != 0.0) {
                min_y = std::min(min_y, y);
                max_y = std::max(max_y, y);
            }
    CHECK(min_y == 85);
    CHECK(max_y == 85 + 85 - 1);
}

TEST_CASE("resize_pad preserves aspect ratio within one pixel") {
    Rng rng(37);
    for (int iter = 0; iter < 10; ++iter) {
        const int h = static_cast<int>(rng.uniform_int(20, 200));
        const int w = static_cast<int>(rng.uniform_int(20, 200));
        Tensor img = Tensor::full({h, w}, 1.0);
        Tensor out = resize_pad(img, 96);
        int rows = 0, cols = 0;
        for (int y = 0; y < 96; ++y) {
            bool any = false;
            for (int x = 0; x < 96; ++x) any = any || out[y * 96 + x] != 0.0;
            rows += any ? 1 : 0;
        }
        for (int x = 0; x < 96; ++x) {
            bool any = false;
            for (int y = 0; y < 96; ++y) any = any || out[y * 96 + x] != 0.0;
            cols += any ? 1 : 0;
        }
        const double in_ratio = static_cast<double>(h) / w;
        const double out_ratio = static_cast<double>(rows) / cols;
        // one pixel of slack on the rounded short side
        const double tol = 1.0 / std::min(rows, cols) + 1.0 / 96.0;
        CHECK(std::abs(in_ratio - out_ratio) / in_ratio < tol + 0.02);
        CHECK(std::max(rows, cols) == 96);
    }
}

TEST_CASE("normalization stats over two constant images") {
    std::vector<Tensor> train{Tensor::full({4, 4}, 5.0), Tensor::full({4, 4}, 7.0)};
    NormalizationStats s = compute_stats(train);
    CHECK(s.mean == doctest::Approx(6.0).epsilon(1e-15));
    CHECK(s.std_dev == doctest::Approx(1.0).epsilon(1e-15));
    Tensor n0 = normalize(train[0], s);
    Tensor n1 = normalize(train[1], s);
    CHECK(n0[0] == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(n1[0] == doctest::Approx(1.0).epsilon(1e-15));

    CHECK_THROWS_AS(compute_stats({Tensor::full({4, 4}, 5.0)}), Error);
    CHECK_THROWS_AS(compute_stats({}), Error);
}

TEST_CASE("normalize round-trips and re-computed stats hit the fixed point") {
    Rng rng(41);
    std::vector<Tensor> train;
    for (int i = 0; i < 3; ++i) {
        Tensor img({8, 8});
        for (std::int64_t k = 0; k < img.size(); ++k) img[k] = rng.uniform(0.0, 9.0);
        train.push_back(img);
    }
    NormalizationStats s = compute_stats(train, 2);
    CHECK(s.fold_id == 2);
    std::vector<Tensor> normed;
    for (const Tensor& img : train) {
        Tensor n = normalize(img, s);
        Tensor back = denormalize(n, s);
        for (std::int64_t k = 0; k < img.size(); ++k) CHECK(std::abs(back[k] - img[k]) < 1e-9);
        normed.push_back(n);
    }
    NormalizationStats s2 = compute_stats(normed);
    CHECK(std::abs(s2.mean) < 1e-12);
    CHECK(s2.std_dev == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("screening stacks always have T frames with the documented fill") {
    Tensor cur = Tensor::full({4, 4}, 1.0);
    Tensor p1 = Tensor::full({4, 4}, 2.0);
    Tensor p2 = Tensor::full({4, 4}, 3.0);

    Tensor one = stack_screenings({cur}, 2);
    REQUIRE(one.shape() == std::vector<int>{2, 4, 4});
    CHECK(one[0] == 1.0);
    CHECK(one[16] == 1.0); // duplicated current

    Tensor three = stack_screenings({cur, p1, p2}, 3);
    CHECK(three[0] == 1.0);
    CHECK(three[16] == 2.0);
    CHECK(three[32] == 3.0);

    Tensor gap = stack_screenings({cur, p1}, 3);
    CHECK(gap[0] == 1.0);
    CHECK(gap[16] == 2.0);
    CHECK(gap[32] == 2.0); // oldest available fills the missing prior

    Tensor gap2 = stack_screenings({cur, p1}, 3, HistoryFill::current);
    CHECK(gap2[32] == 1.0); // alternative rule duplicates the current frame

    Tensor trunc = stack_screenings({cur, p1, p2}, 2);
    REQUIRE(trunc.shape() == std::vector<int>{2, 4, 4});
    CHECK(trunc[16] == 2.0);

    CHECK_THROWS_AS(stack_screenings({}, 2), Error);
}

TEST_CASE("view names round-trip") {
    for (View v : {View::LCC, View::RCC, View::LMLO, View::RMLO}) CHECK(view_from_name(view_name(v)) == v);
    CHECK_THROWS_AS(view_from_name("XYZ"), Error);
    CHECK(view_is_left(View::LCC));
    CHECK(view_is_left(View::LMLO));
    CHECK(!view_is_left(View::RCC));
    CHECK(view_is_cc(View::RCC));
    CHECK(!view_is_cc(View::RMLO));
}
