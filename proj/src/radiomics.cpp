#include "radifusion/radiomics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "radifusion/error.hpp"

namespace radif {

namespace {

constexpr double kLogEps = std::numeric_limits<double>::epsilon(); // 2^-52 guard inside logs

double log2e(double p) { return std::log2(p + kLogEps); }

// linear-interpolation percentile on a sorted array, q in [0,100]
double percentile_sorted(const std::vector<double>& sorted, double q) {
    const std::size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double h = (static_cast<double>(n) - 1.0) * q / 100.0;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

struct MaskedValues {
    std::vector<double> values;
};

MaskedValues masked_values(const Tensor& img, const Tensor& mask) {
    if (img.rank() != 2 || mask.rank() != 2 || !img.same_shape(mask))
        throw Error::validation("image and mask must be matching [H,W] tensors, got " + shape_str(img.shape()) +
                                " and " + shape_str(mask.shape()));
    MaskedValues mv;
    for (std::int64_t i = 0; i < img.size(); ++i) {
        if (mask[i] != 0.0) {
            if (!std::isfinite(img[i])) throw Error::validation("masked pixel values must be finite");
            mv.values.push_back(img[i]);
        }
    }
    return mv;
}

// population central moments
struct Moments {
    double mean = 0, m2 = 0, m3 = 0, m4 = 0;
};

Moments central_moments(const std::vector<double>& v) {
    Moments m;
    const double n = static_cast<double>(v.size());
    for (double x : v) m.mean += x;
    m.mean /= n;
    for (double x : v) {
        const double d = x - m.mean;
        m.m2 += d * d;
        m.m3 += d * d * d;
        m.m4 += d * d * d * d;
    }
    m.m2 /= n;
    m.m3 /= n;
    m.m4 /= n;
    return m;
}

// 8-neighbour offsets
constexpr int kOff8[8][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}};
// the four co-occurrence / run directions: 0, 45, 90, 135 degrees
constexpr int kDir4[4][2] = {{0, 1}, {-1, 1}, {-1, 0}, {-1, -1}};

// Largest-off-diagonal-pivot Jacobi eigensolver for a dense symmetric
// matrix; returns the eigenvalues (unordered).
std::vector<double> jacobi_eigenvalues(std::vector<double> a, int n) {
    const auto at = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i) * n + j]; };
    for (int sweep = 0; sweep < 200; ++sweep) {
        int p = 0, q = 1;
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (std::abs(at(i, j)) > off) {
                    off = std::abs(at(i, j));
                    p = i;
                    q = j;
                }
        if (off < 1e-14) break;
        const double app = at(p, p), aqq = at(q, q), apq = at(p, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
            const double akp = at(k, p), akq = at(k, q);
            at(k, p) = c * akp - s * akq;
            at(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
            const double apk = at(p, k), aqk = at(q, k);
            at(p, k) = c * apk - s * aqk;
            at(q, k) = s * apk + c * aqk;
        }
        (void)app;
        (void)aqq;
    }
    std::vector<double> eig(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) eig[static_cast<std::size_t>(i)] = at(i, i);
    return eig;
}

} // namespace

QuantizedImage quantize(const Tensor& img, const Tensor& mask, int n_bins) {
    if (n_bins < 1) throw Error::validation("quantize needs at least one bin");
    MaskedValues mv = masked_values(img, mask);
    if (mv.values.size() < 2) throw Error::validation("quantize needs at least 2 masked pixels, got " +
                                                      std::to_string(mv.values.size()));
    double lo = mv.values[0], hi = mv.values[0];
    for (double v : mv.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    QuantizedImage q;
    q.h = img.dim(0);
    q.w = img.dim(1);
    q.n_bins = n_bins;
    q.levels.assign(static_cast<std::size_t>(img.size()), 0);
    q.mask.assign(static_cast<std::size_t>(img.size()), 0);
    q.masked_count = static_cast<std::int64_t>(mv.values.size());
    const double width = (hi - lo) / n_bins;
    for (std::int64_t i = 0; i < img.size(); ++i) {
        if (mask[i] == 0.0) continue;
        q.mask[static_cast<std::size_t>(i)] = 1;
        int level = 1;
        if (hi > lo) level = std::min(n_bins, 1 + static_cast<int>((img[i] - lo) / width));
        q.levels[static_cast<std::size_t>(i)] = level;
    }
    return q;
}

std::vector<double> first_order_features(const Tensor& img, const Tensor& mask, int n_bins) {
    MaskedValues mv = masked_values(img, mask);
    const std::vector<double>& x = mv.values;
    if (x.size() < 2) throw Error::validation("first-order statistics need at least 2 masked pixels");
    const double n = static_cast<double>(x.size());

    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    const double vmin = sorted.front(), vmax = sorted.back();
    const Moments m = central_moments(x);

    double energy = 0.0;
    for (double v : x) energy += v * v;

    // histogram-based entropy / uniformity on the quantized levels
    QuantizedImage q = quantize(img, mask, n_bins);
    std::vector<double> p(static_cast<std::size_t>(n_bins) + 1, 0.0);
    for (std::size_t i = 0; i < q.levels.size(); ++i)
        if (q.mask[i]) p[static_cast<std::size_t>(q.levels[i])] += 1.0;
    double entropy = 0.0, uniformity = 0.0;
    for (int b = 1; b <= n_bins; ++b) {
        const double pb = p[static_cast<std::size_t>(b)] / n;
        if (pb > 0.0) entropy -= pb * log2e(pb);
        uniformity += pb * pb;
    }

    const double p10 = percentile_sorted(sorted, 10.0);
    const double p90 = percentile_sorted(sorted, 90.0);
    const double median = percentile_sorted(sorted, 50.0);
    const double iqr = percentile_sorted(sorted, 75.0) - percentile_sorted(sorted, 25.0);

    double mad = 0.0;
    for (double v : x) mad += std::abs(v - m.mean);
    mad /= n;

    // robust MAD: mean absolute deviation of the [P10, P90] subset from the
    // subset's own mean; empty subset yields 0
    double rmad = 0.0;
    {
        std::vector<double> sub;
        for (double v : x)
            if (v >= p10 && v <= p90) sub.push_back(v);
        if (!sub.empty()) {
            double sm = 0.0;
            for (double v : sub) sm += v;
            sm /= static_cast<double>(sub.size());
            for (double v : sub) rmad += std::abs(v - sm);
            rmad /= static_cast<double>(sub.size());
        }
    }

    const double rms = std::sqrt(energy / n);
    const double skew = m.m2 > 0.0 ? m.m3 / std::pow(m.m2, 1.5) : 0.0;
    const double kurt = m.m2 > 0.0 ? m.m4 / (m.m2 * m.m2) : 0.0;

    return {energy, energy /* total energy, unit pixel area */, entropy, vmin, p10, p90, vmax, m.mean, median,
            iqr, vmax - vmin, mad, rmad, rms, skew, kurt, m.m2, uniformity};
}

namespace {

// One direction's symmetric normalized co-occurrence matrix, dense over
// levels 1..Nb.
struct GlcmDir {
    std::vector<double> P; // (Nb+1)^2, 1-based
    std::int64_t pairs = 0;
};

std::vector<GlcmDir> glcm_matrices(const QuantizedImage& q) {
    const int nb = q.n_bins;
    std::vector<GlcmDir> dirs(4);
    for (auto& d : dirs) d.P.assign(static_cast<std::size_t>(nb + 1) * (nb + 1), 0.0);
    for (int y = 0; y < q.h; ++y)
        for (int x = 0; x < q.w; ++x) {
            if (!q.in_mask(y, x)) continue;
            for (int k = 0; k < 4; ++k) {
                const int ny = y + kDir4[k][0], nx = x + kDir4[k][1];
                if (ny < 0 || ny >= q.h || nx < 0 || nx >= q.w || !q.in_mask(ny, nx)) continue;
                const int i = q.level_at(y, x), j = q.level_at(ny, nx);
                dirs[static_cast<std::size_t>(k)].P[static_cast<std::size_t>(i) * (nb + 1) + j] += 1.0;
                dirs[static_cast<std::size_t>(k)].P[static_cast<std::size_t>(j) * (nb + 1) + i] += 1.0;
                ++dirs[static_cast<std::size_t>(k)].pairs;
            }
        }
    for (auto& d : dirs) {
        if (d.pairs == 0) continue;
        const double total = 2.0 * static_cast<double>(d.pairs);
        for (double& v : d.P) v /= total;
    }
    return dirs;
}

// the 23 co-occurrence features for one direction
std::vector<double> glcm_dir_features(const GlcmDir& d, int nb, int ng_present) {
    const auto P = [&](int i, int j) { return d.P[static_cast<std::size_t>(i) * (nb + 1) + j]; };

    std::vector<double> px(static_cast<std::size_t>(nb) + 1, 0.0);
    for (int i = 1; i <= nb; ++i)
        for (int j = 1; j <= nb; ++j) px[static_cast<std::size_t>(i)] += P(i, j);
    // symmetric matrix: py == px
    double mu = 0.0;
    for (int i = 1; i <= nb; ++i) mu += i * px[static_cast<std::size_t>(i)];
    double sig2 = 0.0;
    for (int i = 1; i <= nb; ++i) sig2 += (i - mu) * (i - mu) * px[static_cast<std::size_t>(i)];

    std::vector<double> pdiff(static_cast<std::size_t>(nb), 0.0);      // k = 0..nb-1
    std::vector<double> psum(2 * static_cast<std::size_t>(nb) + 1, 0.0); // s = 2..2nb
    double autoc = 0, prom = 0, shade = 0, tend = 0, contrast = 0, corr_num = 0;
    double jenergy = 0, jentropy = 0, maxp = 0, ssq = 0, hxy1 = 0, hxy2 = 0;
    for (int i = 1; i <= nb; ++i)
        for (int j = 1; j <= nb; ++j) {
            const double p = P(i, j);
            const double pipj = px[static_cast<std::size_t>(i)] * px[static_cast<std::size_t>(j)];
            if (pipj > 0.0) hxy2 -= pipj * log2e(pipj);
            if (p == 0.0) continue;
            pdiff[static_cast<std::size_t>(std::abs(i - j))] += p;
            psum[static_cast<std::size_t>(i + j)] += p;
            autoc += static_cast<double>(i) * j * p;
            const double cdev = i + j - 2.0 * mu;
            prom += cdev * cdev * cdev * cdev * p;
            shade += cdev * cdev * cdev * p;
            tend += cdev * cdev * p;
            contrast += static_cast<double>(i - j) * (i - j) * p;
            corr_num += (i - mu) * (j - mu) * p;
            jenergy += p * p;
            jentropy -= p * log2e(p);
            maxp = std::max(maxp, p);
            ssq += (i - mu) * (i - mu) * p;
            hxy1 -= p * log2e(pipj);
        }

    const double correlation = sig2 > 0.0 ? corr_num / sig2 : 1.0;

    double da = 0.0;
    for (int k = 0; k < nb; ++k) da += k * pdiff[static_cast<std::size_t>(k)];
    double dentropy = 0.0, dvar = 0.0, idm = 0.0, idmn = 0.0, id = 0.0, idn = 0.0, invvar = 0.0;
    for (int k = 0; k < nb; ++k) {
        const double p = pdiff[static_cast<std::size_t>(k)];
        if (p > 0.0) dentropy -= p * log2e(p);
        dvar += (k - da) * (k - da) * p;
        idm += p / (1.0 + static_cast<double>(k) * k);
        idmn += p / (1.0 + static_cast<double>(k) * k / (static_cast<double>(ng_present) * ng_present));
        id += p / (1.0 + k);
        idn += p / (1.0 + static_cast<double>(k) / ng_present);
        if (k >= 1) invvar += p / (static_cast<double>(k) * k);
    }

    double sentropy = 0.0;
    for (int s = 2; s <= 2 * nb; ++s) {
        const double p = psum[static_cast<std::size_t>(s)];
        if (p > 0.0) sentropy -= p * log2e(p);
    }

    double hx = 0.0;
    for (int i = 1; i <= nb; ++i) {
        const double p = px[static_cast<std::size_t>(i)];
        if (p > 0.0) hx -= p * log2e(p);
    }
    const double imc1 = hx > 0.0 ? (jentropy - hxy1) / hx : 0.0;
    const double imc2 = std::sqrt(std::max(0.0, 1.0 - std::exp(-2.0 * (hxy2 - jentropy))));

    // maximal correlation coefficient: with D = diag(px) over the levels
    // present in this direction, S = D^(-1/2) P D^(-1/2) is symmetric with
    // top eigenvalue 1; MCC is its second-largest absolute eigenvalue
    double mcc = 1.0;
    {
        std::vector<int> lv;
        for (int i = 1; i <= nb; ++i)
            if (px[static_cast<std::size_t>(i)] > 0.0) lv.push_back(i);
        const int m = static_cast<int>(lv.size());
        if (m >= 2) {
            std::vector<double> S(static_cast<std::size_t>(m) * m, 0.0);
            for (int a = 0; a < m; ++a)
                for (int b = 0; b < m; ++b)
                    S[static_cast<std::size_t>(a) * m + b] =
                        P(lv[static_cast<std::size_t>(a)], lv[static_cast<std::size_t>(b)]) /
                        std::sqrt(px[static_cast<std::size_t>(lv[static_cast<std::size_t>(a)])] *
                                  px[static_cast<std::size_t>(lv[static_cast<std::size_t>(b)])]);
            std::vector<double> eig = jacobi_eigenvalues(std::move(S), m);
            for (double& e : eig) e = std::abs(e);
            std::sort(eig.begin(), eig.end(), std::greater<double>());
            mcc = eig[1];
        }
    }

    return {autoc,   mu,        prom,  shade, tend, contrast, correlation, da,   dentropy, dvar,  jenergy, jentropy,
            imc1,    imc2,      idm,   mcc,   idmn, id,       idn,         invvar, maxp,   sentropy, ssq};
}

} // namespace

std::vector<double> glcm_features(const QuantizedImage& q) {
    std::vector<GlcmDir> dirs = glcm_matrices(q);
    std::int64_t total_pairs = 0;
    for (const auto& d : dirs) total_pairs += d.pairs;
    if (total_pairs < 2) throw Error::validation("co-occurrence statistics need at least 2 pixel pairs");

    int ng_present = 0;
    {
        std::vector<char> seen(static_cast<std::size_t>(q.n_bins) + 1, 0);
        for (std::size_t i = 0; i < q.levels.size(); ++i)
            if (q.mask[i]) seen[static_cast<std::size_t>(q.levels[i])] = 1;
        for (int b = 1; b <= q.n_bins; ++b) ng_present += seen[static_cast<std::size_t>(b)];
    }

    std::vector<double> acc(kGlcmCount, 0.0);
    int used = 0;
    for (const auto& d : dirs) {
        if (d.pairs == 0) continue; // skip directions with no co-occurrences
        std::vector<double> f = glcm_dir_features(d, q.n_bins, ng_present);
        for (int i = 0; i < kGlcmCount; ++i) acc[static_cast<std::size_t>(i)] += f[static_cast<std::size_t>(i)];
        ++used;
    }
    for (double& v : acc) v /= used;
    return acc;
}

std::vector<double> glszm_features(const QuantizedImage& q) {
    // zones: 8-connected same-level regions inside the mask
    std::vector<char> done(q.levels.size(), 0);
    std::map<std::pair<int, std::int64_t>, double> cells; // (level, size) -> zone count
    std::vector<std::int64_t> stack;
    std::int64_t nz = 0;
    for (int y = 0; y < q.h; ++y)
        for (int x = 0; x < q.w; ++x) {
            const std::int64_t p0 = static_cast<std::int64_t>(y) * q.w + x;
            if (!q.mask[static_cast<std::size_t>(p0)] || done[static_cast<std::size_t>(p0)]) continue;
            const int lv = q.levels[static_cast<std::size_t>(p0)];
            std::int64_t size = 0;
            done[static_cast<std::size_t>(p0)] = 1;
            stack.push_back(p0);
            while (!stack.empty()) {
                const std::int64_t p = stack.back();
                stack.pop_back();
                ++size;
                const int py = static_cast<int>(p / q.w), px = static_cast<int>(p % q.w);
                for (const auto& off : kOff8) {
                    const int ny = py + off[0], nx = px + off[1];
                    if (ny < 0 || ny >= q.h || nx < 0 || nx >= q.w) continue;
                    const std::int64_t pn = static_cast<std::int64_t>(ny) * q.w + nx;
                    if (!q.mask[static_cast<std::size_t>(pn)] || done[static_cast<std::size_t>(pn)] ||
                        q.levels[static_cast<std::size_t>(pn)] != lv)
                        continue;
                    done[static_cast<std::size_t>(pn)] = 1;
                    stack.push_back(pn);
                }
            }
            cells[{lv, size}] += 1.0;
            ++nz;
        }
    if (nz == 0) throw Error::validation("size-zone statistics need a non-empty mask");
    const double Nz = static_cast<double>(nz);
    const double Np = static_cast<double>(q.masked_count);

    std::map<int, double> by_level;
    std::map<std::int64_t, double> by_size;
    double sae = 0, lae = 0, lglze = 0, hglze = 0, salgle = 0, sahgle = 0, lalgle = 0, lahgle = 0;
    double mu_i = 0, mu_s = 0, ze = 0;
    for (const auto& [key, c] : cells) {
        const double i = static_cast<double>(key.first);
        const double s = static_cast<double>(key.second);
        by_level[key.first] += c;
        by_size[key.second] += c;
        sae += c / (s * s);
        lae += c * s * s;
        lglze += c / (i * i);
        hglze += c * i * i;
        salgle += c / (i * i * s * s);
        sahgle += c * i * i / (s * s);
        lalgle += c * s * s / (i * i);
        lahgle += c * i * i * s * s;
        const double p = c / Nz;
        mu_i += p * i;
        mu_s += p * s;
        ze -= p * log2e(p);
    }
    double gln = 0, glnn = 0, szn = 0, sznn = 0, glv = 0, zv = 0;
    for (const auto& [lv, c] : by_level) {
        gln += c * c;
        (void)lv;
    }
    for (const auto& [sz, c] : by_size) {
        szn += c * c;
        (void)sz;
    }
    glnn = gln / (Nz * Nz);
    sznn = szn / (Nz * Nz);
    gln /= Nz;
    szn /= Nz;
    for (const auto& [key, c] : cells) {
        const double p = c / Nz;
        glv += p * (key.first - mu_i) * (key.first - mu_i);
        zv += p * (static_cast<double>(key.second) - mu_s) * (static_cast<double>(key.second) - mu_s);
    }
    return {sae / Nz, lae / Nz, gln,          glnn,         szn,          sznn,         Nz / Np,     glv,
            zv,       ze,       lglze / Nz,   hglze / Nz,   salgle / Nz,  sahgle / Nz,  lalgle / Nz, lahgle / Nz};
}

namespace {

// runs of one direction: aggregated (level, length) -> run count
std::map<std::pair<int, int>, double> glrlm_runs(const QuantizedImage& q, int dy, int dx) {
    std::map<std::pair<int, int>, double> runs;
    // walk every maximal line in direction (dy,dx); starts are cells whose
    // predecessor is outside the image
    for (int y = 0; y < q.h; ++y)
        for (int x = 0; x < q.w; ++x) {
            const int py = y - dy, px = x - dx;
            if (py >= 0 && py < q.h && px >= 0 && px < q.w) continue; // not a line start
            int cy = y, cx = x;
            int run_level = 0, run_len = 0;
            while (cy >= 0 && cy < q.h && cx >= 0 && cx < q.w) {
                const int lv = q.in_mask(cy, cx) ? q.level_at(cy, cx) : 0;
                if (lv == run_level) {
                    ++run_len;
                } else {
                    if (run_level != 0) runs[{run_level, run_len}] += 1.0;
                    run_level = lv;
                    run_len = 1;
                }
                cy += dy;
                cx += dx;
            }
            if (run_level != 0) runs[{run_level, run_len}] += 1.0;
        }
    return runs;
}

std::vector<double> glrlm_dir_features(const std::map<std::pair<int, int>, double>& runs, double Np) {
    double Nr = 0.0;
    for (const auto& [k, c] : runs) {
        Nr += c;
        (void)k;
    }
    std::map<int, double> by_level;
    std::map<int, double> by_len;
    double sre = 0, lre = 0, lglre = 0, hglre = 0, srlgle = 0, srhgle = 0, lrlgle = 0, lrhgle = 0;
    double mu_i = 0, mu_r = 0, re = 0;
    for (const auto& [key, c] : runs) {
        const double i = static_cast<double>(key.first);
        const double r = static_cast<double>(key.second);
        by_level[key.first] += c;
        by_len[key.second] += c;
        sre += c / (r * r);
        lre += c * r * r;
        lglre += c / (i * i);
        hglre += c * i * i;
        srlgle += c / (i * i * r * r);
        srhgle += c * i * i / (r * r);
        lrlgle += c * r * r / (i * i);
        lrhgle += c * i * i * r * r;
        const double p = c / Nr;
        mu_i += p * i;
        mu_r += p * r;
        re -= p * log2e(p);
    }
    double gln = 0, rln = 0, glv = 0, rv = 0;
    for (const auto& [lv, c] : by_level) {
        gln += c * c;
        (void)lv;
    }
    for (const auto& [ln, c] : by_len) {
        rln += c * c;
        (void)ln;
    }
    for (const auto& [key, c] : runs) {
        const double p = c / Nr;
        glv += p * (key.first - mu_i) * (key.first - mu_i);
        rv += p * (key.second - mu_r) * (key.second - mu_r);
    }
    return {sre / Nr,    lre / Nr,    gln / Nr, gln / (Nr * Nr), rln / Nr, rln / (Nr * Nr), Nr / Np, glv,
            rv,          re,          lglre / Nr, hglre / Nr,    srlgle / Nr, srhgle / Nr,  lrlgle / Nr,
            lrhgle / Nr};
}

} // namespace

std::vector<double> glrlm_features(const QuantizedImage& q) {
    if (q.masked_count == 0) throw Error::validation("run-length statistics need a non-empty mask");
    std::vector<double> acc(kGlrlmCount, 0.0);
    int used = 0;
    for (const auto& d : kDir4) {
        auto runs = glrlm_runs(q, d[0], d[1]);
        if (runs.empty()) continue;
        std::vector<double> f = glrlm_dir_features(runs, static_cast<double>(q.masked_count));
        for (int i = 0; i < kGlrlmCount; ++i) acc[static_cast<std::size_t>(i)] += f[static_cast<std::size_t>(i)];
        ++used;
    }
    if (used == 0) throw Error::validation("no runs found in any direction");
    for (double& v : acc) v /= used;
    return acc;
}

std::vector<double> ngtdm_features(const QuantizedImage& q) {
    const int nb = q.n_bins;
    std::vector<double> s(static_cast<std::size_t>(nb) + 1, 0.0);
    std::vector<double> cnt(static_cast<std::size_t>(nb) + 1, 0.0);
    std::int64_t n_valid = 0;
    for (int y = 0; y < q.h; ++y)
        for (int x = 0; x < q.w; ++x) {
            if (!q.in_mask(y, x)) continue;
            double sum = 0.0;
            int k = 0;
            for (const auto& off : kOff8) {
                const int ny = y + off[0], nx = x + off[1];
                if (ny < 0 || ny >= q.h || nx < 0 || nx >= q.w || !q.in_mask(ny, nx)) continue;
                sum += q.level_at(ny, nx);
                ++k;
            }
            if (k == 0) continue; // isolated pixels do not participate
            const int lv = q.level_at(y, x);
            s[static_cast<std::size_t>(lv)] += std::abs(lv - sum / k);
            cnt[static_cast<std::size_t>(lv)] += 1.0;
            ++n_valid;
        }
    if (n_valid == 0) throw Error::validation("neighbourhood statistics need at least one pixel with a masked neighbour");
    const double N = static_cast<double>(n_valid);

    std::vector<int> present;
    for (int i = 1; i <= nb; ++i)
        if (cnt[static_cast<std::size_t>(i)] > 0.0) present.push_back(i);
    const double ngp = static_cast<double>(present.size());

    double sps = 0.0, ssum = 0.0;
    for (int i : present) {
        sps += cnt[static_cast<std::size_t>(i)] / N * s[static_cast<std::size_t>(i)];
        ssum += s[static_cast<std::size_t>(i)];
    }

    const double coarseness = sps > 0.0 ? std::min(1.0 / sps, 1e6) : 1e6;

    double contrast = 0.0;
    if (present.size() > 1) {
        double acc = 0.0;
        for (int i : present)
            for (int j : present) {
                const double pi = cnt[static_cast<std::size_t>(i)] / N;
                const double pj = cnt[static_cast<std::size_t>(j)] / N;
                acc += pi * pj * (i - j) * (i - j);
            }
        contrast = acc / (ngp * (ngp - 1.0)) * (ssum / N);
    }

    double busy_den = 0.0;
    for (int i : present)
        for (int j : present) {
            const double pi = cnt[static_cast<std::size_t>(i)] / N;
            const double pj = cnt[static_cast<std::size_t>(j)] / N;
            busy_den += std::abs(i * pi - j * pj);
        }
    const double busyness = busy_den > 0.0 ? sps / busy_den : 0.0;

    double complexity = 0.0;
    for (int i : present)
        for (int j : present) {
            const double pi = cnt[static_cast<std::size_t>(i)] / N;
            const double pj = cnt[static_cast<std::size_t>(j)] / N;
            complexity += std::abs(i - j) * (pi * s[static_cast<std::size_t>(i)] + pj * s[static_cast<std::size_t>(j)]) /
                          (pi + pj);
        }
    complexity /= N;

    double strength = 0.0;
    if (ssum > 0.0) {
        for (int i : present)
            for (int j : present) {
                const double pi = cnt[static_cast<std::size_t>(i)] / N;
                const double pj = cnt[static_cast<std::size_t>(j)] / N;
                strength += (pi + pj) * (i - j) * (i - j);
            }
        strength /= ssum;
    }

    return {coarseness, contrast, busyness, complexity, strength};
}

std::vector<double> gldm_features(const QuantizedImage& q) {
    if (q.masked_count == 0) throw Error::validation("dependence statistics need a non-empty mask");
    // dependence = 1 + number of 8-neighbours with the same level (alpha=0)
    std::map<std::pair<int, int>, double> cells; // (level, dependence) -> count
    for (int y = 0; y < q.h; ++y)
        for (int x = 0; x < q.w; ++x) {
            if (!q.in_mask(y, x)) continue;
            const int lv = q.level_at(y, x);
            int dep = 1;
            for (const auto& off : kOff8) {
                const int ny = y + off[0], nx = x + off[1];
                if (ny < 0 || ny >= q.h || nx < 0 || nx >= q.w || !q.in_mask(ny, nx)) continue;
                if (q.level_at(ny, nx) == lv) ++dep;
            }
            cells[{lv, dep}] += 1.0;
        }
    const double Nz = static_cast<double>(q.masked_count);
    std::map<int, double> by_level, by_dep;
    double sde = 0, lde = 0, lgle = 0, hgle = 0, sdlgle = 0, sdhgle = 0, ldlgle = 0, ldhgle = 0;
    double mu_i = 0, mu_j = 0, de = 0;
    for (const auto& [key, c] : cells) {
        const double i = static_cast<double>(key.first);
        const double j = static_cast<double>(key.second);
        by_level[key.first] += c;
        by_dep[key.second] += c;
        sde += c / (j * j);
        lde += c * j * j;
        lgle += c / (i * i);
        hgle += c * i * i;
        sdlgle += c / (i * i * j * j);
        sdhgle += c * i * i / (j * j);
        ldlgle += c * j * j / (i * i);
        ldhgle += c * i * i * j * j;
        const double p = c / Nz;
        mu_i += p * i;
        mu_j += p * j;
        de -= p * log2e(p);
    }
    double gln = 0, dn = 0, glv = 0, dv = 0;
    for (const auto& [lv, c] : by_level) {
        gln += c * c;
        (void)lv;
    }
    for (const auto& [dp, c] : by_dep) {
        dn += c * c;
        (void)dp;
    }
    for (const auto& [key, c] : cells) {
        const double p = c / Nz;
        glv += p * (key.first - mu_i) * (key.first - mu_i);
        dv += p * (key.second - mu_j) * (key.second - mu_j);
    }
    return {sde / Nz, lde / Nz, gln / Nz, dn / Nz,      dn / (Nz * Nz), glv,          dv,           de,
            lgle / Nz, hgle / Nz, sdlgle / Nz, sdhgle / Nz, ldlgle / Nz,  ldhgle / Nz};
}

namespace {

// 1-D orthonormal type-II DCT of each row of a flat [rows, len] buffer
void dct1_rows(std::vector<double>& data, int rows, int len) {
    std::vector<double> tmp(static_cast<std::size_t>(len));
    std::vector<double> tbl(static_cast<std::size_t>(len) * len);
    const double pi = 3.14159265358979323846;
    for (int m = 0; m < len; ++m)
        for (int x = 0; x < len; ++x)
            tbl[static_cast<std::size_t>(m) * len + x] = std::cos((2.0 * x + 1.0) * m * pi / (2.0 * len));
    const double norm = std::sqrt(2.0 / len);
    for (int r = 0; r < rows; ++r) {
        double* row = data.data() + static_cast<std::size_t>(r) * len;
        for (int m = 0; m < len; ++m) {
            double acc = 0.0;
            const double* t = tbl.data() + static_cast<std::size_t>(m) * len;
            for (int x = 0; x < len; ++x) acc += row[x] * t[x];
            tmp[static_cast<std::size_t>(m)] = norm * (m == 0 ? 1.0 / std::sqrt(2.0) : 1.0) * acc;
        }
        for (int m = 0; m < len; ++m) row[m] = tmp[static_cast<std::size_t>(m)];
    }
}

void transpose_flat(std::vector<double>& data, int rows, int cols) {
    std::vector<double> out(data.size());
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            out[static_cast<std::size_t>(c) * rows + r] = data[static_cast<std::size_t>(r) * cols + c];
    data.swap(out);
}

// complex DFT of length n over (re, im); radix-2 when n is a power of two,
// direct evaluation otherwise
void dft1(std::vector<double>& re, std::vector<double>& im) {
    const std::size_t n = re.size();
    const double pi = 3.14159265358979323846;
    if (n >= 2 && (n & (n - 1)) == 0) {
        // iterative radix-2
        for (std::size_t i = 1, j = 0; i < n; ++i) {
            std::size_t bit = n >> 1;
            for (; j & bit; bit >>= 1) j ^= bit;
            j ^= bit;
            if (i < j) {
                std::swap(re[i], re[j]);
                std::swap(im[i], im[j]);
            }
        }
        for (std::size_t len = 2; len <= n; len <<= 1) {
            const double ang = -2.0 * pi / static_cast<double>(len);
            const double wr = std::cos(ang), wi = std::sin(ang);
            for (std::size_t i = 0; i < n; i += len) {
                double cr = 1.0, ci = 0.0;
                for (std::size_t k = 0; k < len / 2; ++k) {
                    const double ur = re[i + k], ui = im[i + k];
                    const double vr = re[i + k + len / 2] * cr - im[i + k + len / 2] * ci;
                    const double vi = re[i + k + len / 2] * ci + im[i + k + len / 2] * cr;
                    re[i + k] = ur + vr;
                    im[i + k] = ui + vi;
                    re[i + k + len / 2] = ur - vr;
                    im[i + k + len / 2] = ui - vi;
                    const double ncr = cr * wr - ci * wi;
                    ci = cr * wi + ci * wr;
                    cr = ncr;
                }
            }
        }
        return;
    }
    std::vector<double> ore(n, 0.0), oim(n, 0.0);
    for (std::size_t m = 0; m < n; ++m) {
        for (std::size_t x = 0; x < n; ++x) {
            const double ang = -2.0 * pi * static_cast<double>(m) * static_cast<double>(x) / static_cast<double>(n);
            const double c = std::cos(ang), s = std::sin(ang);
            ore[m] += re[x] * c - im[x] * s;
            oim[m] += re[x] * s + im[x] * c;
        }
    }
    re.swap(ore);
    im.swap(oim);
}

} // namespace

Tensor dct2(const Tensor& img) {
    if (img.rank() != 2) throw Error::validation("dct2 expects an [H,W] image, got " + shape_str(img.shape()));
    const int h = img.dim(0), w = img.dim(1);
    std::vector<double> buf = img.vec();
    dct1_rows(buf, h, w);       // transform along y-index (columns within each row)
    transpose_flat(buf, h, w);  // now [w, h]
    dct1_rows(buf, w, h);
    transpose_flat(buf, w, h);
    return Tensor({h, w}, std::move(buf));
}

Tensor fft2_magnitude(const Tensor& img) {
    if (img.rank() != 2) throw Error::validation("fft2 expects an [H,W] image, got " + shape_str(img.shape()));
    const int h = img.dim(0), w = img.dim(1);
    std::vector<double> re = img.vec(), im(re.size(), 0.0);
    // rows
    for (int r = 0; r < h; ++r) {
        std::vector<double> rr(re.begin() + static_cast<std::ptrdiff_t>(r) * w,
                               re.begin() + static_cast<std::ptrdiff_t>(r + 1) * w);
        std::vector<double> ri(im.begin() + static_cast<std::ptrdiff_t>(r) * w,
                               im.begin() + static_cast<std::ptrdiff_t>(r + 1) * w);
        dft1(rr, ri);
        std::copy(rr.begin(), rr.end(), re.begin() + static_cast<std::ptrdiff_t>(r) * w);
        std::copy(ri.begin(), ri.end(), im.begin() + static_cast<std::ptrdiff_t>(r) * w);
    }
    // columns
    std::vector<double> cr(static_cast<std::size_t>(h)), ci(static_cast<std::size_t>(h));
    for (int c = 0; c < w; ++c) {
        for (int r = 0; r < h; ++r) {
            cr[static_cast<std::size_t>(r)] = re[static_cast<std::size_t>(r) * w + c];
            ci[static_cast<std::size_t>(r)] = im[static_cast<std::size_t>(r) * w + c];
        }
        dft1(cr, ci);
        for (int r = 0; r < h; ++r) {
            re[static_cast<std::size_t>(r) * w + c] = cr[static_cast<std::size_t>(r)];
            im[static_cast<std::size_t>(r) * w + c] = ci[static_cast<std::size_t>(r)];
        }
    }
    Tensor out({h, w});
    for (std::int64_t i = 0; i < out.size(); ++i)
        out[i] = std::hypot(re[static_cast<std::size_t>(i)], im[static_cast<std::size_t>(i)]);
    return out;
}

std::vector<double> frequency_features(const Tensor& map) {
    std::vector<double> v = map.vec();
    if (v.empty()) throw Error::validation("frequency statistics need a non-empty map");
    for (double x : v)
        if (!std::isfinite(x)) throw Error::validation("frequency map contains non-finite values");
    const double n = static_cast<double>(v.size());
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    const Moments m = central_moments(v);
    const double vmin = sorted.front(), vmax = sorted.back();

    double energy = 0.0, mad = 0.0;
    for (double x : v) {
        energy += x * x;
        mad += std::abs(x - m.mean);
    }
    mad /= n;
    const double rms = std::sqrt(energy / n);
    const double skew = m.m2 > 0.0 ? m.m3 / std::pow(m.m2, 1.5) : 0.0;
    const double kurt = m.m2 > 0.0 ? m.m4 / (m.m2 * m.m2) : 0.0;

    // 32-bin equal-width histogram entropy / uniformity; a constant map is
    // a single bin: entropy 0, uniformity 1
    double entropy = 0.0, uniformity = 1.0;
    if (vmax > vmin) {
        const int bins = 32;
        std::vector<double> hist(bins, 0.0);
        const double width = (vmax - vmin) / bins;
        for (double x : v) {
            int b = static_cast<int>((x - vmin) / width);
            b = std::clamp(b, 0, bins - 1);
            hist[static_cast<std::size_t>(b)] += 1.0;
        }
        uniformity = 0.0;
        for (double c : hist) {
            const double p = c / n;
            if (p > 0.0) entropy -= p * log2e(p);
            uniformity += p * p;
        }
    }

    const double median = percentile_sorted(sorted, 50.0);
    const double iqr = percentile_sorted(sorted, 75.0) - percentile_sorted(sorted, 25.0);
    std::vector<double> absdev(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) absdev[i] = std::abs(v[i] - median);
    std::sort(absdev.begin(), absdev.end());
    const double medad = percentile_sorted(absdev, 50.0);

    return {m.mean, vmax, m.m2, skew, kurt, entropy, energy, rms, uniformity, vmin, median, vmax - vmin, iqr, mad,
            medad};
}

const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names = [] {
        const std::vector<std::string> first_order = {
            "Energy", "Total Energy", "Entropy", "Minimum", "10th Percentile", "90th Percentile", "Maximum",
            "Mean", "Median", "Interquartile Range", "Range", "Mean Absolute Deviation",
            "Robust Mean Absolute Deviation", "Root Mean Squared", "Skewness", "Kurtosis", "Variance", "Uniformity"};
        const std::vector<std::string> glcm = {
            "Autocorrelation", "Joint Average", "Cluster Prominence", "Cluster Shade", "Cluster Tendency",
            "Contrast", "Correlation", "Difference Average", "Difference Entropy", "Difference Variance",
            "Joint Energy", "Joint Entropy", "Informational Measure of Correlation 1",
            "Informational Measure of Correlation 2", "Inverse Difference Moment", "Maximal Correlation Coefficient",
            "Inverse Difference Moment Normalized", "Inverse Difference", "Inverse Difference Normalized",
            "Inverse Variance", "Maximum Probability", "Sum Entropy", "Sum Squares"};
        const std::vector<std::string> glszm = {
            "Small Area Emphasis", "Large Area Emphasis", "Gray Level Non-Uniformity",
            "Gray Level Non-Uniformity Normalized", "Size Zone Non-Uniformity",
            "Size Zone Non-Uniformity Normalized", "Zone Percentage", "Gray Level Variance", "Zone Variance",
            "Zone Entropy", "Low Gray Level Zone Emphasis", "High Gray Level Zone Emphasis",
            "Small Area Low Gray Level Emphasis", "Small Area High Gray Level Emphasis",
            "Large Area Low Gray Level Emphasis", "Large Area High Gray Level Emphasis"};
        const std::vector<std::string> glrlm = {
            "Short Run Emphasis", "Long Run Emphasis", "Gray Level Non-Uniformity",
            "Gray Level Non-Uniformity Normalized", "Run Length Non-Uniformity",
            "Run Length Non-Uniformity Normalized", "Run Percentage", "Gray Level Variance", "Run Variance",
            "Run Entropy", "Low Gray Level Run Emphasis", "High Gray Level Run Emphasis",
            "Short Run Low Gray Level Emphasis", "Short Run High Gray Level Emphasis",
            "Long Run Low Gray Level Emphasis", "Long Run High Gray Level Emphasis"};
        const std::vector<std::string> ngtdm = {"Coarseness", "Contrast", "Busyness", "Complexity", "Strength"};
        const std::vector<std::string> gldm = {
            "Small Dependence Emphasis", "Large Dependence Emphasis", "Gray Level Non-Uniformity",
            "Dependence Non-Uniformity", "Dependence Non-Uniformity Normalized", "Gray Level Variance",
            "Dependence Variance", "Dependence Entropy", "Low Gray Level Emphasis", "High Gray Level Emphasis",
            "Small Dependence Low Gray Level Emphasis", "Small Dependence High Gray Level Emphasis",
            "Large Dependence Low Gray Level Emphasis", "Large Dependence High Gray Level Emphasis"};
        const std::vector<std::string> freq = {
            "Mean", "Maximum", "Variance", "Skew", "Kurtosis", "Entropy", "Energy", "Root Mean Square",
            "Uniformity", "Minimum", "Median", "Range", "Interquartile Range", "Mean Absolute Deviation",
            "Median Absolute Deviation"};

        std::vector<std::string> all;
        const auto append = [&all](const char* prefix, const std::vector<std::string>& group) {
            for (const std::string& n : group) all.push_back(std::string(prefix) + "_" + n);
        };
        append("FirstOrder", first_order);
        append("GLCM", glcm);
        append("GLSZM", glszm);
        append("GLRLM", glrlm);
        append("NGTDM", ngtdm);
        append("GLDM", gldm);
        append("DCT", freq);
        append("FFT", freq);
        return all;
    }();
    return names;
}

std::vector<double> extract_all(const Tensor& img, const Tensor& mask) {
    std::vector<double> out;
    out.reserve(kFeatureCount);
    const auto append = [&out](const std::vector<double>& v) { out.insert(out.end(), v.begin(), v.end()); };
    append(first_order_features(img, mask));
    QuantizedImage q = quantize(img, mask);
    append(glcm_features(q));
    append(glszm_features(q));
    append(glrlm_features(q));
    append(ngtdm_features(q));
    append(gldm_features(q));
    append(frequency_features(dct2(img)));
    append(frequency_features(fft2_magnitude(img)));
    if (static_cast<int>(out.size()) != kFeatureCount)
        throw Error::runtime("internal: expected " + std::to_string(kFeatureCount) + " features, built " +
                             std::to_string(out.size()));
    for (double v : out)
        if (!std::isfinite(v)) throw Error::runtime("internal: non-finite feature value produced");
    return out;
}

} // namespace radif
