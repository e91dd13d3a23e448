#pragma once

// Brute-force reference implementations for the texture / frequency
// features, written directly from the definitions with no shared code with
// the library: dense 2-D arrays, explicit pair enumeration, naive O(N^4)
// transforms. Deliberately slow and obvious.

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "radifusion/tensor.hpp"

namespace oracle {

inline double olog2(double p) { return std::log2(p + std::numeric_limits<double>::epsilon()); }

struct Grid {
    int h = 0, w = 0;
    std::vector<std::vector<int>> level; // 0 outside mask
};

inline Grid o_quantize(const radif::Tensor& img, const radif::Tensor& mask, int nb) {
    Grid g;
    g.h = img.dim(0);
    g.w = img.dim(1);
    g.level.assign(static_cast<std::size_t>(g.h), std::vector<int>(static_cast<std::size_t>(g.w), 0));
    double lo = 1e300, hi = -1e300;
    for (int y = 0; y < g.h; ++y)
        for (int x = 0; x < g.w; ++x)
            if (mask[static_cast<std::int64_t>(y) * g.w + x] != 0.0) {
                lo = std::min(lo, img[static_cast<std::int64_t>(y) * g.w + x]);
                hi = std::max(hi, img[static_cast<std::int64_t>(y) * g.w + x]);
            }
    for (int y = 0; y < g.h; ++y)
        for (int x = 0; x < g.w; ++x) {
            if (mask[static_cast<std::int64_t>(y) * g.w + x] == 0.0) continue;
            const double v = img[static_cast<std::int64_t>(y) * g.w + x];
            int lvl = 1;
            if (hi > lo) {
                lvl = 1 + static_cast<int>((v - lo) / ((hi - lo) / nb));
                if (lvl > nb) lvl = nb;
            }
            g.level[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = lvl;
        }
    return g;
}

inline double o_percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    if (v.size() == 1) return v[0];
    const double h = (static_cast<double>(v.size()) - 1.0) * q / 100.0;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - std::floor(h)) * (v[hi] - v[lo]);
}

inline std::vector<double> o_first_order(const radif::Tensor& img, const radif::Tensor& mask, int nb) {
    std::vector<double> x;
    for (std::int64_t i = 0; i < img.size(); ++i)
        if (mask[i] != 0.0) x.push_back(img[i]);
    const double n = static_cast<double>(x.size());

    double mean = 0;
    for (double v : x) mean += v;
    mean /= n;
    double m2 = 0, m3 = 0, m4 = 0, energy = 0, mad = 0;
    for (double v : x) {
        m2 += (v - mean) * (v - mean);
        m3 += (v - mean) * (v - mean) * (v - mean);
        m4 += (v - mean) * (v - mean) * (v - mean) * (v - mean);
        energy += v * v;
        mad += std::abs(v - mean);
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    mad /= n;

    const double vmin = *std::min_element(x.begin(), x.end());
    const double vmax = *std::max_element(x.begin(), x.end());
    const double p10 = o_percentile(x, 10), p90 = o_percentile(x, 90);

    std::vector<double> sub;
    for (double v : x)
        if (v >= p10 && v <= p90) sub.push_back(v);
    double rmad = 0;
    if (!sub.empty()) {
        double sm = 0;
        for (double v : sub) sm += v;
        sm /= static_cast<double>(sub.size());
        for (double v : sub) rmad += std::abs(v - sm);
        rmad /= static_cast<double>(sub.size());
    }

    // histogram over nb quantized levels
    Grid g = o_quantize(img, mask, nb);
    std::vector<double> cnt(static_cast<std::size_t>(nb) + 1, 0.0);
    for (int y = 0; y < g.h; ++y)
        for (int xx = 0; xx < g.w; ++xx)
            if (g.level[static_cast<std::size_t>(y)][static_cast<std::size_t>(xx)] > 0)
                cnt[static_cast<std::size_t>(g.level[static_cast<std::size_t>(y)][static_cast<std::size_t>(xx)])] += 1;
    double ent = 0, unif = 0;
    for (int b = 1; b <= nb; ++b) {
        const double p = cnt[static_cast<std::size_t>(b)] / n;
        if (p > 0) ent -= p * olog2(p);
        unif += p * p;
    }

    return {energy,
            energy,
            ent,
            vmin,
            p10,
            p90,
            vmax,
            mean,
            o_percentile(x, 50),
            o_percentile(x, 75) - o_percentile(x, 25),
            vmax - vmin,
            mad,
            rmad,
            std::sqrt(energy / n),
            m2 > 0 ? m3 / std::pow(m2, 1.5) : 0.0,
            m2 > 0 ? m4 / (m2 * m2) : 0.0,
            m2,
            unif};
}

// ---- GLCM ------------------------------------------------------------

// symmetric normalized co-occurrence matrix for one direction, dense
// [nb+1][nb+1]; returns total raw (unsymmetrized) pair count
inline std::int64_t o_glcm_matrix(const Grid& g, int nb, int dy, int dx, std::vector<std::vector<double>>& P) {
    P.assign(static_cast<std::size_t>(nb) + 1, std::vector<double>(static_cast<std::size_t>(nb) + 1, 0.0));
    std::int64_t pairs = 0;
    for (int y = 0; y < g.h; ++y)
        for (int x = 0; x < g.w; ++x) {
            const int i = g.level[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
            if (i == 0) continue;
            const int ny = y + dy, nx = x + dx;
            if (ny < 0 || ny >= g.h || nx < 0 || nx >= g.w) continue;
            const int j = g.level[static_cast<std::size_t>(ny)][static_cast<std::size_t>(nx)];
            if (j == 0) continue;
            P[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] += 1.0;
            P[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] += 1.0;
            ++pairs;
        }
    double tot = 0;
    for (int i = 1; i <= nb; ++i)
        for (int j = 1; j <= nb; ++j) tot += P[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    if (tot > 0)
        for (int i = 1; i <= nb; ++i)
            for (int j = 1; j <= nb; ++j) P[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] /= tot;
    return pairs;
}

// cyclic-sweep Jacobi eigenvalues (symmetric input)
inline std::vector<double> o_jacobi(std::vector<std::vector<double>> a) {
    const int n = static_cast<int>(a.size());
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
                                                   a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        if (off < 1e-28) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                const double apq = a[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)];
                if (std::abs(apq) < 1e-300) continue;
                const double theta =
                    (a[static_cast<std::size_t>(q)][static_cast<std::size_t>(q)] - a[static_cast<std::size_t>(p)][static_cast<std::size_t>(p)]) /
                    (2 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
                const double c = 1 / std::sqrt(t * t + 1), s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a[static_cast<std::size_t>(k)][static_cast<std::size_t>(p)];
                    const double akq = a[static_cast<std::size_t>(k)][static_cast<std::size_t>(q)];
                    a[static_cast<std::size_t>(k)][static_cast<std::size_t>(p)] = c * akp - s * akq;
                    a[static_cast<std::size_t>(k)][static_cast<std::size_t>(q)] = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a[static_cast<std::size_t>(p)][static_cast<std::size_t>(k)];
                    const double aqk = a[static_cast<std::size_t>(q)][static_cast<std::size_t>(k)];
                    a[static_cast<std::size_t>(p)][static_cast<std::size_t>(k)] = c * apk - s * aqk;
                    a[static_cast<std::size_t>(q)][static_cast<std::size_t>(k)] = s * apk + c * aqk;
                }
            }
    }
    std::vector<double> eig;
    for (int i = 0; i < n; ++i) eig.push_back(a[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)]);
    return eig;
}

inline std::vector<double> o_glcm_dir(const std::vector<std::vector<double>>& P, int nb, int ng_present) {
    std::vector<double> px(static_cast<std::size_t>(nb) + 1, 0.0);
    for (int i = 1; i <= nb; ++i)
        for (int j = 1; j <= nb; ++j) px[static_cast<std::size_t>(i)] += P[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    double mux = 0, muy = 0;
    for (int i = 1; i <= nb; ++i) mux += i * px[static_cast<std::size_t>(i)];
    muy = mux;
    double sx2 = 0;
    for (int i = 1; i <= nb; ++i) sx2 += (i - mux) * (i - mux) * px[static_cast<std::size_t>(i)];

    double autoc = 0, prom = 0, shade = 0, tend = 0, contrast = 0, corr = 0, je = 0, jent = 0, maxp = 0, ssq = 0;
    double hxy1 = 0, hxy2 = 0;
    for (int i = 1; i <= nb; ++i)
        for (int j = 1; j <= nb; ++j) {
            const double p = P[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            const double pp = px[static_cast<std::size_t>(i)] * px[static_cast<std::size_t>(j)];
            if (pp > 0) hxy2 -= pp * olog2(pp);
            if (p == 0) continue;
            autoc += static_cast<double>(i) * j * p;
            prom += std::pow(i + j - mux - muy, 4.0) * p;
            shade += std::pow(i + j - mux - muy, 3.0) * p;
            tend += std::pow(i + j - mux - muy, 2.0) * p;
            contrast += (i - j) * (i - j) * p;
            corr += (i - mux) * (j - muy) * p;
            je += p * p;
            jent -= p * olog2(p);
            maxp = std::max(maxp, p);
            ssq += (i - mux) * (i - mux) * p;
            hxy1 -= p * olog2(pp);
        }
    const double correlation = sx2 > 0 ? (corr) / (std::sqrt(sx2) * std::sqrt(sx2)) : 1.0;

    std::vector<double> pd(static_cast<std::size_t>(nb), 0.0), ps(2 * static_cast<std::size_t>(nb) + 1, 0.0);
    for (int i = 1; i <= nb; ++i)
        for (int j = 1; j <= nb; ++j) {
            pd[static_cast<std::size_t>(std::abs(i - j))] += P[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            ps[static_cast<std::size_t>(i + j)] += P[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    double davg = 0;
    for (int k = 0; k < nb; ++k) davg += k * pd[static_cast<std::size_t>(k)];
    double dent = 0, dvar = 0, idm = 0, idmn = 0, idf = 0, idn = 0, iv = 0;
    for (int k = 0; k < nb; ++k) {
        const double p = pd[static_cast<std::size_t>(k)];
        if (p > 0) dent -= p * olog2(p);
        dvar += (k - davg) * (k - davg) * p;
        idm += p / (1.0 + k * k);
        idmn += p / (1.0 + static_cast<double>(k * k) / (static_cast<double>(ng_present) * ng_present));
        idf += p / (1.0 + k);
        idn += p / (1.0 + static_cast<double>(k) / ng_present);
        if (k > 0) iv += p / (k * k);
    }
    double sent = 0;
    for (int ssi = 2; ssi <= 2 * nb; ++ssi)
        if (ps[static_cast<std::size_t>(ssi)] > 0) sent -= ps[static_cast<std::size_t>(ssi)] * olog2(ps[static_cast<std::size_t>(ssi)]);

    double hx = 0;
    for (int i = 1; i <= nb; ++i)
        if (px[static_cast<std::size_t>(i)] > 0) hx -= px[static_cast<std::size_t>(i)] * olog2(px[static_cast<std::size_t>(i)]);
    const double imc1 = hx > 0 ? (jent - hxy1) / hx : 0.0;
    double imc2in = 1.0 - std::exp(-2.0 * (hxy2 - jent));
    if (imc2in < 0) imc2in = 0;
    const double imc2 = std::sqrt(imc2in);

    // MCC via the normalized symmetric kernel over present levels
    double mcc = 1.0;
    std::vector<int> lv;
    for (int i = 1; i <= nb; ++i)
        if (px[static_cast<std::size_t>(i)] > 0) lv.push_back(i);
    if (lv.size() >= 2) {
        const int m = static_cast<int>(lv.size());
        std::vector<std::vector<double>> S(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(m), 0.0));
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b)
                S[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] =
                    P[static_cast<std::size_t>(lv[static_cast<std::size_t>(a)])][static_cast<std::size_t>(lv[static_cast<std::size_t>(b)])] /
                    std::sqrt(px[static_cast<std::size_t>(lv[static_cast<std::size_t>(a)])] * px[static_cast<std::size_t>(lv[static_cast<std::size_t>(b)])]);
        std::vector<double> eig = o_jacobi(S);
        for (double& e : eig) e = std::abs(e);
        std::sort(eig.rbegin(), eig.rend());
        mcc = eig[1];
    }

    return {autoc, mux, prom, shade, tend, contrast, correlation, davg, dent, dvar, je, jent, imc1, imc2, idm, mcc,
            idmn, idf, idn, iv, maxp, sent, ssq};
}

inline std::vector<double> o_glcm(const radif::Tensor& img, const radif::Tensor& mask, int nb) {
    Grid g = o_quantize(img, mask, nb);
    int ng = 0;
    {
        std::vector<char> seen(static_cast<std::size_t>(nb) + 1, 0);
        for (int y = 0; y < g.h; ++y)
            for (int x = 0; x < g.w; ++x)
                if (g.level[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] > 0)
                    seen[static_cast<std::size_t>(g.level[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)])] = 1;
        for (int b = 1; b <= nb; ++b) ng += seen[static_cast<std::size_t>(b)];
    }
    const int dirs[4][2] = {{0, 1}, {-1, 1}, {-1, 0}, {-1, -1}};
    std::vector<double> acc(23, 0.0);
    int used = 0;
    for (const auto& d : dirs) {
        std::vector<std::vector<double>> P;
        if (o_glcm_matrix(g, nb, d[0], d[1], P) == 0) continue;
        std::vector<double> f = o_glcm_dir(P, nb, ng);
        for (int i = 0; i < 23; ++i) acc[static_cast<std::size_t>(i)] += f[static_cast<std::size_t>(i)];
        ++used;
    }
    for (double& v : acc) v /= used;
    return acc;
}

// ---- GLSZM ------------------------------------------------------------

inline std::vector<double> o_glszm(const radif::Tensor& img, const radif::Tensor& mask, int nb) {
    Grid g = o_quantize(img, mask, nb);
    std::vector<std::vector<char>> vis(static_cast<std::size_t>(g.h), std::vector<char>(static_cast<std::size_t>(g.w), 0));
    // dense matrix P[level][size]
    std::int64_t np = 0;
    for (int y = 0; y < g.h; ++y)
        for (int x = 0; x < g.w; ++x)
            if (g.level[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] > 0) ++np;
    std::vector<std::vector<double>> P(static_cast<std::size_t>(nb) + 1, std::vector<double>(static_cast<std::size_t>(np) + 1, 0.0));
    double Nz = 0;
    for (int y = 0; y < g.h; ++y)
        for (int x = 0; x < g.w; ++x) {
            const int lv = g.level[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
            if (lv == 0 || vis[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)]) continue;
            std::queue<std::pair<int, int>> bfs;
            bfs.push({y, x});
            vis[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = 1;
            int size = 0;
            while (!bfs.empty()) {
                auto [cy, cx] = bfs.front();
                bfs.pop();
                ++size;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dy == 0 && dx == 0) continue;
                        const int ny = cy + dy, nx = cx + dx;
                        if (ny < 0 || ny >= g.h || nx < 0 || nx >= g.w) continue;
                        if (vis[static_cast<std::size_t>(ny)][static_cast<std::size_t>(nx)]) continue;
                        if (g.level[static_cast<std::size_t>(ny)][static_cast<std::size_t>(nx)] != lv) continue;
                        vis[static_cast<std::size_t>(ny)][static_cast<std::size_t>(nx)] = 1;
                        bfs.push({ny, nx});
                    }
            }
            P[static_cast<std::size_t>(lv)][static_cast<std::size_t>(size)] += 1.0;
            Nz += 1.0;
        }

    double sae = 0, lae = 0, gln = 0, szn = 0, zp = 0, glv = 0, zv = 0, ze = 0;
    double lglze = 0, hglze = 0, salgle = 0, sahgle = 0, lalgle = 0, lahgle = 0;
    for (int i = 1; i <= nb; ++i) {
        double row = 0;
        for (std::int64_t s = 1; s <= np; ++s) {
            const double c = P[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)];
            row += c;
            if (c == 0) continue;
            sae += c / (static_cast<double>(s) * s);
            lae += c * s * s;
            lglze += c / (static_cast<double>(i) * i);
            hglze += c * i * i;
            salgle += c / (static_cast<double>(i) * i * s * s);
            sahgle += c * i * i / (static_cast<double>(s) * s);
            lalgle += c * s * s / (static_cast<double>(i) * i);
            lahgle += c * static_cast<double>(i) * i * s * s;
            const double p = c / Nz;
            ze -= p * olog2(p);
        }
        gln += row * row;
    }
    for (std::int64_t s = 1; s <= np; ++s) {
        double col = 0;
        for (int i = 1; i <= nb; ++i) col += P[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)];
        szn += col * col;
    }
    double mui = 0, mus = 0;
    for (int i = 1; i <= nb; ++i)
        for (std::int64_t s = 1; s <= np; ++s) {
            const double p = P[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)] / Nz;
            mui += p * i;
            mus += p * static_cast<double>(s);
        }
    for (int i = 1; i <= nb; ++i)
        for (std::int64_t s = 1; s <= np; ++s) {
            const double p = P[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)] / Nz;
            glv += p * (i - mui) * (i - mui);
            zv += p * (static_cast<double>(s) - mus) * (static_cast<double>(s) - mus);
        }
    zp = Nz / static_cast<double>(np);
    return {sae / Nz, lae / Nz, gln / Nz, gln / (Nz * Nz), szn / Nz, szn / (Nz * Nz), zp, glv, zv, ze,
            lglze / Nz, hglze / Nz, salgle / Nz, sahgle / Nz, lalgle / Nz, lahgle / Nz};
}

// ---- GLRLM ------------------------------------------------------------

// dense run matrix for one direction: P[level][length]
inline double o_glrlm_matrix(const Grid& g, int nb, int dy, int dx, std::vector<std::vector<double>>& P) {
    const int maxlen = std::max(g.h, g.w);
    P.assign(static_cast<std::size_t>(nb) + 1, std::vector<double>(static_cast<std::size_t>(maxlen) + 1, 0.0));
    double Nr = 0;
    for (int y = 0; y < g.h; ++y)
        for (int x = 0; x < g.w; ++x) {
            const int lv = g.level[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
            if (lv == 0) continue;
            const int py = y - dy, px = x - dx;
            const bool prev_same = py >= 0 && py < g.h && px >= 0 && px < g.w &&
                                   g.level[static_cast<std::size_t>(py)][static_cast<std::size_t>(px)] == lv;
            if (prev_same) continue; // not a run start
            int len = 0, cy = y, cx = x;
            while (cy >= 0 && cy < g.h && cx >= 0 && cx < g.w &&
                   g.level[static_cast<std::size_t>(cy)][static_cast<std::size_t>(cx)] == lv) {
                ++len;
                cy += dy;
                cx += dx;
            }
            P[static_cast<std::size_t>(lv)][static_cast<std::size_t>(len)] += 1.0;
            Nr += 1.0;
        }
    return Nr;
}

inline std::vector<double> o_glrlm_dir(const std::vector<std::vector<double>>& P, double Nr, double np) {
    const int nb = static_cast<int>(P.size()) - 1;
    const int maxlen = static_cast<int>(P[0].size()) - 1;
    double sre = 0, lre = 0, gln = 0, rln = 0, glv = 0, rv = 0, re = 0;
    double lgl = 0, hgl = 0, srl = 0, srh = 0, lrl = 0, lrh = 0;
    for (int i = 1; i <= nb; ++i) {
        double row = 0;
        for (int r = 1; r <= maxlen; ++r) {
            const double c = P[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)];
            row += c;
            if (c == 0) continue;
            sre += c / (static_cast<double>(r) * r);
            lre += c * r * r;
            lgl += c / (static_cast<double>(i) * i);
            hgl += c * i * i;
            srl += c / (static_cast<double>(i) * i * r * r);
            srh += c * i * i / (static_cast<double>(r) * r);
            lrl += c * r * r / (static_cast<double>(i) * i);
            lrh += c * static_cast<double>(i) * i * r * r;
            const double p = c / Nr;
            re -= p * olog2(p);
        }
        gln += row * row;
    }
    for (int r = 1; r <= maxlen; ++r) {
        double col = 0;
        for (int i = 1; i <= nb; ++i) col += P[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)];
        rln += col * col;
    }
    double mui = 0, mur = 0;
    for (int i = 1; i <= nb; ++i)
        for (int r = 1; r <= maxlen; ++r) {
            const double p = P[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)] / Nr;
            mui += p * i;
            mur += p * r;
        }
    for (int i = 1; i <= nb; ++i)
        for (int r = 1; r <= maxlen; ++r) {
            const double p = P[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)] / Nr;
            glv += p * (i - mui) * (i - mui);
            rv += p * (r - mur) * (r - mur);
        }
    return {sre / Nr, lre / Nr, gln / Nr, gln / (Nr * Nr), rln / Nr, rln / (Nr * Nr), Nr / np, glv, rv, re,
            lgl / Nr, hgl / Nr, srl / Nr, srh / Nr, lrl / Nr, lrh / Nr};
}

inline std::vector<double> o_glrlm(const radif::Tensor& img, const radif::Tensor& mask, int nb) {
    Grid g = o_quantize(img, mask, nb);
    double np = 0;
    for (int y = 0; y < g.h; ++y)
        for (int x = 0; x < g.w; ++x)
            if (g.level[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] > 0) np += 1.0;
    const int dirs[4][2] = {{0, 1}, {-1, 1}, {-1, 0}, {-1, -1}};
    std::vector<double> acc(16, 0.0);
    int used = 0;
    for (const auto& d : dirs) {
        std::vector<std::vector<double>> P;
        const double nr = o_glrlm_matrix(g, nb, d[0], d[1], P);
        if (nr == 0) continue;
        std::vector<double> f = o_glrlm_dir(P, nr, np);
        for (int i = 0; i < 16; ++i) acc[static_cast<std::size_t>(i)] += f[static_cast<std::size_t>(i)];
        ++used;
    }
    for (double& v : acc) v /= used;
    return acc;
}

// ---- NGTDM ------------------------------------------------------------

inline std::vector<double> o_ngtdm(const radif::Tensor& img, const radif::Tensor& mask, int nb) {
    Grid g = o_quantize(img, mask, nb);
    std::vector<double> si(static_cast<std::size_t>(nb) + 1, 0.0), ni(static_cast<std::size_t>(nb) + 1, 0.0);
    double N = 0;
    for (int y = 0; y < g.h; ++y)
        for (int x = 0; x < g.w; ++x) {
            const int lv = g.level[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
            if (lv == 0) continue;
            double sum = 0;
            int k = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dy == 0 && dx == 0) continue;
                    const int ny = y + dy, nx = x + dx;
                    if (ny < 0 || ny >= g.h || nx < 0 || nx >= g.w) continue;
                    const int nl = g.level[static_cast<std::size_t>(ny)][static_cast<std::size_t>(nx)];
                    if (nl == 0) continue;
                    sum += nl;
                    ++k;
                }
            if (k == 0) continue;
            si[static_cast<std::size_t>(lv)] += std::abs(lv - sum / k);
            ni[static_cast<std::size_t>(lv)] += 1.0;
            N += 1.0;
        }

    double sps = 0, stot = 0;
    std::vector<int> present;
    for (int i = 1; i <= nb; ++i)
        if (ni[static_cast<std::size_t>(i)] > 0) {
            present.push_back(i);
            sps += ni[static_cast<std::size_t>(i)] / N * si[static_cast<std::size_t>(i)];
            stot += si[static_cast<std::size_t>(i)];
        }
    const double ngp = static_cast<double>(present.size());

    const double coarse = sps > 0 ? std::min(1.0 / sps, 1e6) : 1e6;
    double contrast = 0;
    if (ngp > 1) {
        for (int i : present)
            for (int j : present)
                contrast += ni[static_cast<std::size_t>(i)] / N * ni[static_cast<std::size_t>(j)] / N * (i - j) * (i - j);
        contrast *= stot / N / (ngp * (ngp - 1));
    }
    double bden = 0, busy = 0;
    for (int i : present)
        for (int j : present)
            bden += std::abs(i * ni[static_cast<std::size_t>(i)] / N - j * ni[static_cast<std::size_t>(j)] / N);
    busy = bden > 0 ? sps / bden : 0.0;
    double cmpx = 0;
    for (int i : present)
        for (int j : present) {
            const double pi = ni[static_cast<std::size_t>(i)] / N, pj = ni[static_cast<std::size_t>(j)] / N;
            cmpx += std::abs(i - j) * (pi * si[static_cast<std::size_t>(i)] + pj * si[static_cast<std::size_t>(j)]) / (pi + pj);
        }
    cmpx /= N;
    double stren = 0;
    if (stot > 0) {
        for (int i : present)
            for (int j : present)
                stren += (ni[static_cast<std::size_t>(i)] / N + ni[static_cast<std::size_t>(j)] / N) * (i - j) * (i - j);
        stren /= stot;
    }
    return {coarse, contrast, busy, cmpx, stren};
}

// ---- GLDM -------------------------------------------------------------

inline std::vector<double> o_gldm(const radif::Tensor& img, const radif::Tensor& mask, int nb) {
    Grid g = o_quantize(img, mask, nb);
    std::vector<std::vector<double>> P(static_cast<std::size_t>(nb) + 1, std::vector<double>(10, 0.0)); // dep <= 9
    double Nz = 0;
    for (int y = 0; y < g.h; ++y)
        for (int x = 0; x < g.w; ++x) {
            const int lv = g.level[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
            if (lv == 0) continue;
            int dep = 1;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dy == 0 && dx == 0) continue;
                    const int ny = y + dy, nx = x + dx;
                    if (ny < 0 || ny >= g.h || nx < 0 || nx >= g.w) continue;
                    if (g.level[static_cast<std::size_t>(ny)][static_cast<std::size_t>(nx)] == lv) ++dep;
                }
            P[static_cast<std::size_t>(lv)][static_cast<std::size_t>(dep)] += 1.0;
            Nz += 1.0;
        }
    double sde = 0, lde = 0, gln = 0, dn = 0, glv = 0, dv = 0, de = 0;
    double lgl = 0, hgl = 0, sdl = 0, sdh = 0, ldl = 0, ldh = 0;
    for (int i = 1; i <= nb; ++i) {
        double row = 0;
        for (int j = 1; j <= 9; ++j) {
            const double c = P[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            row += c;
            if (c == 0) continue;
            sde += c / (static_cast<double>(j) * j);
            lde += c * j * j;
            lgl += c / (static_cast<double>(i) * i);
            hgl += c * i * i;
            sdl += c / (static_cast<double>(i) * i * j * j);
            sdh += c * i * i / (static_cast<double>(j) * j);
            ldl += c * j * j / (static_cast<double>(i) * i);
            ldh += c * static_cast<double>(i) * i * j * j;
            const double p = c / Nz;
            de -= p * olog2(p);
        }
        gln += row * row;
    }
    for (int j = 1; j <= 9; ++j) {
        double col = 0;
        for (int i = 1; i <= nb; ++i) col += P[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        dn += col * col;
    }
    double mui = 0, muj = 0;
    for (int i = 1; i <= nb; ++i)
        for (int j = 1; j <= 9; ++j) {
            const double p = P[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] / Nz;
            mui += p * i;
            muj += p * j;
        }
    for (int i = 1; i <= nb; ++i)
        for (int j = 1; j <= 9; ++j) {
            const double p = P[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] / Nz;
            glv += p * (i - mui) * (i - mui);
            dv += p * (j - muj) * (j - muj);
        }
    return {sde / Nz, lde / Nz, gln / Nz, dn / Nz, dn / (Nz * Nz), glv, dv, de,
            lgl / Nz, hgl / Nz, sdl / Nz, sdh / Nz, ldl / Nz, ldh / Nz};
}

// ---- frequency maps -----------------------------------------------------

inline radif::Tensor o_dct2(const radif::Tensor& f) {
    const int M = f.dim(0), N = f.dim(1);
    radif::Tensor out({M, N});
    const double pi = std::acos(-1.0);
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n) {
            double acc = 0;
            for (int x = 0; x < M; ++x)
                for (int y = 0; y < N; ++y)
                    acc += f[static_cast<std::int64_t>(x) * N + y] * std::cos((2.0 * x + 1.0) * m * pi / (2.0 * M)) *
                           std::cos((2.0 * y + 1.0) * n * pi / (2.0 * N));
            const double cm = m == 0 ? 1.0 / std::sqrt(2.0) : 1.0;
            const double cn = n == 0 ? 1.0 / std::sqrt(2.0) : 1.0;
            out[static_cast<std::int64_t>(m) * N + n] = 2.0 / std::sqrt(static_cast<double>(M) * N) * cm * cn * acc;
        }
    return out;
}

inline radif::Tensor o_fft2_mag(const radif::Tensor& f) {
    const int M = f.dim(0), N = f.dim(1);
    radif::Tensor out({M, N});
    const double pi = std::acos(-1.0);
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n) {
            double re = 0, im = 0;
            for (int x = 0; x < M; ++x)
                for (int y = 0; y < N; ++y) {
                    const double ang = -2.0 * pi * (static_cast<double>(x) * m / M + static_cast<double>(y) * n / N);
                    re += f[static_cast<std::int64_t>(x) * N + y] * std::cos(ang);
                    im += f[static_cast<std::int64_t>(x) * N + y] * std::sin(ang);
                }
            out[static_cast<std::int64_t>(m) * N + n] = std::sqrt(re * re + im * im);
        }
    return out;
}

inline std::vector<double> o_freq_stats(const radif::Tensor& map) {
    std::vector<double> v(map.data(), map.data() + map.size());
    const double n = static_cast<double>(v.size());
    double mean = 0;
    for (double x : v) mean += x;
    mean /= n;
    double m2 = 0, m3 = 0, m4 = 0, energy = 0, mad = 0;
    for (double x : v) {
        m2 += (x - mean) * (x - mean);
        m3 += (x - mean) * (x - mean) * (x - mean);
        m4 += (x - mean) * (x - mean) * (x - mean) * (x - mean);
        energy += x * x;
        mad += std::abs(x - mean);
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    mad /= n;
    const double vmin = *std::min_element(v.begin(), v.end());
    const double vmax = *std::max_element(v.begin(), v.end());

    double ent = 0, unif = 1;
    if (vmax > vmin) {
        std::vector<double> hist(32, 0.0);
        for (double x : v) {
            int b = static_cast<int>((x - vmin) / ((vmax - vmin) / 32.0));
            if (b > 31) b = 31;
            if (b < 0) b = 0;
            hist[static_cast<std::size_t>(b)] += 1.0;
        }
        unif = 0;
        for (double c : hist) {
            const double p = c / n;
            if (p > 0) ent -= p * olog2(p);
            unif += p * p;
        }
    }
    const double med = o_percentile(v, 50);
    std::vector<double> ad;
    for (double x : v) ad.push_back(std::abs(x - med));
    return {mean,
            vmax,
            m2,
            m2 > 0 ? m3 / std::pow(m2, 1.5) : 0.0,
            m2 > 0 ? m4 / (m2 * m2) : 0.0,
            ent,
            energy,
            std::sqrt(energy / n),
            unif,
            vmin,
            med,
            vmax - vmin,
            o_percentile(v, 75) - o_percentile(v, 25),
            mad,
            o_percentile(ad, 50)};
}

} // namespace oracle
