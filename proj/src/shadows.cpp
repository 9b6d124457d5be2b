#include "qfi/shadows.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qfi::shadows {

namespace {

using sampling::MeasurementRecord;

// bit k of x (from LSB) moved to position 2k
std::vector<Eigen::Index> spread_table(int n) {
    const Eigen::Index dim = Eigen::Index(1) << n;
    std::vector<Eigen::Index> t(static_cast<std::size_t>(dim));
    for (Eigen::Index x = 0; x < dim; ++x) {
        Eigen::Index s = 0;
        for (int k = 0; k < n; ++k)
            if ((x >> k) & 1) s |= Eigen::Index(1) << (2 * k);
        t[std::size_t(x)] = s;
    }
    return t;
}

// ---- U-statistics term caches -------------------------------------------
//
// Per-tuple scalars are stored next to their packed index tuples so that the
// jackknife (and any batch-subset evaluation) is a cheap scan, and so that
// sums are reduced in a fixed order independent of thread count.

constexpr int kMaxBatches = 16;  // indices packed 4 bits each

std::uint32_t pack2(int a, int b) { return std::uint32_t(a) | std::uint32_t(b) << 4; }
std::uint32_t pack3(int a, int b, int c) { return pack2(a, b) | std::uint32_t(c) << 8; }
std::uint32_t pack4(int a, int b, int c, int d) { return pack3(a, b, c) | std::uint32_t(d) << 12; }
std::uint32_t pack5(int a, int b, int c, int d, int e) {
    return pack4(a, b, c, d) | std::uint32_t(e) << 16;
}

bool tuple_contains(std::uint32_t packed, int order, int b) {
    for (int k = 0; k < order; ++k)
        if (int((packed >> (4 * k)) & 0xF) == b) return true;
    return false;
}

// Tr(X Y A^2) = sum_{k,l} X_kl Y_lk a_k^2 and
// Tr(X A Y A) = sum_{k,l} X_kl a_l Y_lk a_k, with optional implicit
// adjoints (adj: read M_kl as conj(M_lk)) so only b1 < b2 products are kept.
struct TraceTerms {
    Complex t_front;  // Tr(X Y A^2)
    Complex t_split;  // Tr(X A Y A)
};

template <bool AdjX, bool AdjY>
TraceTerms trace_pair_impl(const CMat& x, const CMat& y, const RVec& a) {
    const Eigen::Index d = x.rows();
    Complex front = 0.0, split = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) {
        Complex row_front = 0.0, row_split = 0.0;
        for (Eigen::Index l = 0; l < d; ++l) {
            const Complex xv = AdjX ? std::conj(x(l, k)) : x(k, l);
            const Complex yv = AdjY ? std::conj(y(k, l)) : y(l, k);
            const Complex prod = xv * yv;
            row_front += prod;
            row_split += prod * a[l];
        }
        front += row_front * a[k] * a[k];
        split += row_split * a[k];
    }
    return {front, split};
}

TraceTerms trace_pair(const CMat& x, bool adj_x, const CMat& y, bool adj_y, const RVec& a) {
    if (adj_x) {
        return adj_y ? trace_pair_impl<true, true>(x, y, a)
                     : trace_pair_impl<true, false>(x, y, a);
    }
    return adj_y ? trace_pair_impl<false, true>(x, y, a)
                 : trace_pair_impl<false, false>(x, y, a);
}

Complex trace_product(const CMat& x, bool adj_x, const CMat& y, bool adj_y) {
    const Eigen::Index d = x.rows();
    Complex acc = 0.0;
    for (Eigen::Index k = 0; k < d; ++k)
        for (Eigen::Index l = 0; l < d; ++l) {
            const Complex xv = adj_x ? std::conj(x(l, k)) : x(k, l);
            const Complex yv = adj_y ? std::conj(y(k, l)) : y(l, k);
            acc += xv * yv;
        }
    return acc;
}

// order-5 patterns: cyclic trace over three matrices with diagonal weights
// inserted between them: sum_{k,l,m} X_kl da_l Y_lm db_m Z_mk dc_k.
Complex trace_cycle3(const CMat& x, bool ax, const CMat& y, bool ay, const CMat& z, bool az,
                     const RVec* da, const RVec* db, const RVec* dc) {
    const Eigen::Index d = x.rows();
    Complex acc = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) {
        Complex row = 0.0;
        for (Eigen::Index l = 0; l < d; ++l) {
            const Complex xv = ax ? std::conj(x(l, k)) : x(k, l);
            Complex inner = 0.0;
            for (Eigen::Index m = 0; m < d; ++m) {
                const Complex yv = ay ? std::conj(y(m, l)) : y(l, m);
                const Complex zv = az ? std::conj(z(k, m)) : z(m, k);
                Complex t = yv * zv;
                if (db) t *= (*db)[m];
                inner += t;
            }
            if (da) inner *= (*da)[l];
            row += xv * inner;
        }
        acc += dc ? row * (*dc)[k] : row;
    }
    return acc;
}

// Pairwise products rho_b1 rho_b2 for b1 < b2; (b2, b1) is the adjoint.
struct PairProducts {
    int n_b = 0;
    std::vector<CMat> prods;  // index tri(b1, b2)

    static std::size_t tri(int b1, int b2, int n_b) {
        // b1 < b2
        return std::size_t(b1) * std::size_t(n_b) - std::size_t(b1 * (b1 + 1)) / 2 +
               std::size_t(b2 - b1 - 1);
    }

    const CMat& get(int b1, int b2, bool& adj) const {
        if (b1 < b2) {
            adj = false;
            return prods[tri(b1, b2, n_b)];
        }
        adj = true;
        return prods[tri(b2, b1, n_b)];
    }
};

PairProducts pair_products(std::span<const BatchShadow> shadows) {
    PairProducts pp;
    pp.n_b = int(shadows.size());
    pp.prods.resize(std::size_t(pp.n_b) * std::size_t(pp.n_b - 1) / 2);
    std::vector<std::pair<int, int>> pairs;
    for (int b1 = 0; b1 < pp.n_b; ++b1)
        for (int b2 = b1 + 1; b2 < pp.n_b; ++b2) pairs.emplace_back(b1, b2);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t t = 0; t < std::ptrdiff_t(pairs.size()); ++t) {
        const auto [b1, b2] = pairs[std::size_t(t)];
        pp.prods[PairProducts::tri(b1, b2, pp.n_b)] =
            shadows[std::size_t(b1)].rho_hat * shadows[std::size_t(b2)].rho_hat;
    }
    return pp;
}

struct TermCache {
    int n_b = 0;
    int max_order = 2;
    // packed tuples and values, one entry per ordered tuple of distinct
    // batch indices
    std::vector<std::uint32_t> idx2, idx3, idx4, idx5;
    std::vector<Complex> t20, t11, tpur;  // order 2
    std::vector<Complex> t30, t21;        // order 3
    std::vector<Complex> t40, t22;        // order 4
    std::vector<Complex> t50, t41, t32;   // order 5
};

// Evaluate all per-tuple trace terms up to `max_order` copies of rho.
TermCache build_terms(std::span<const BatchShadow> shadows, const qmath::DiagonalOperator& a,
                      int max_order, bool need_purity) {
    const int n_b = int(shadows.size());
    if (n_b < 2) throw std::invalid_argument("u-statistics: need at least 2 batches");
    if (n_b > kMaxBatches)
        throw std::invalid_argument("u-statistics: more than 16 batches unsupported");
    for (const auto& s : shadows)
        if (s.rho_hat.rows() != a.dim())
            throw std::invalid_argument("u-statistics: shadow/observable size mismatch");

    const RVec& diag = a.diagonal;
    RVec diag2 = diag.cwiseProduct(diag);

    TermCache tc;
    tc.n_b = n_b;
    tc.max_order = max_order;

    // order 2
    for (int b1 = 0; b1 < n_b; ++b1)
        for (int b2 = 0; b2 < n_b; ++b2)
            if (b1 != b2) tc.idx2.push_back(pack2(b1, b2));
    tc.t20.resize(tc.idx2.size());
    tc.t11.resize(tc.idx2.size());
    if (need_purity) tc.tpur.resize(tc.idx2.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t t = 0; t < std::ptrdiff_t(tc.idx2.size()); ++t) {
        const std::uint32_t p = tc.idx2[std::size_t(t)];
        const int b1 = int(p & 0xF), b2 = int((p >> 4) & 0xF);
        const CMat& r1 = shadows[std::size_t(b1)].rho_hat;
        const CMat& r2 = shadows[std::size_t(b2)].rho_hat;
        const TraceTerms tt = trace_pair(r1, false, r2, false, diag);
        tc.t20[std::size_t(t)] = tt.t_front;
        tc.t11[std::size_t(t)] = tt.t_split;
        if (need_purity) tc.tpur[std::size_t(t)] = trace_product(r1, false, r2, false);
    }
    if (max_order < 3) return tc;

    const PairProducts pp = pair_products(shadows);

    // order 3: X = rho_b1 rho_b2, Y = rho_b3
    for (int b1 = 0; b1 < n_b; ++b1)
        for (int b2 = 0; b2 < n_b; ++b2) {
            if (b2 == b1) continue;
            for (int b3 = 0; b3 < n_b; ++b3)
                if (b3 != b1 && b3 != b2) tc.idx3.push_back(pack3(b1, b2, b3));
        }
    tc.t30.resize(tc.idx3.size());
    tc.t21.resize(tc.idx3.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t t = 0; t < std::ptrdiff_t(tc.idx3.size()); ++t) {
        const std::uint32_t p = tc.idx3[std::size_t(t)];
        const int b1 = int(p & 0xF), b2 = int((p >> 4) & 0xF), b3 = int((p >> 8) & 0xF);
        bool adj = false;
        const CMat& x = pp.get(b1, b2, adj);
        const TraceTerms tt =
            trace_pair(x, adj, shadows[std::size_t(b3)].rho_hat, false, diag);
        tc.t30[std::size_t(t)] = tt.t_front;
        tc.t21[std::size_t(t)] = tt.t_split;
    }
    if (max_order < 4) return tc;

    // order 4: X = rho_b1 rho_b2, Y = rho_b3 rho_b4
    for (int b1 = 0; b1 < n_b; ++b1)
        for (int b2 = 0; b2 < n_b; ++b2) {
            if (b2 == b1) continue;
            for (int b3 = 0; b3 < n_b; ++b3) {
                if (b3 == b1 || b3 == b2) continue;
                for (int b4 = 0; b4 < n_b; ++b4)
                    if (b4 != b1 && b4 != b2 && b4 != b3)
                        tc.idx4.push_back(pack4(b1, b2, b3, b4));
            }
        }
    tc.t40.resize(tc.idx4.size());
    tc.t22.resize(tc.idx4.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t t = 0; t < std::ptrdiff_t(tc.idx4.size()); ++t) {
        const std::uint32_t p = tc.idx4[std::size_t(t)];
        const int b1 = int(p & 0xF), b2 = int((p >> 4) & 0xF);
        const int b3 = int((p >> 8) & 0xF), b4 = int((p >> 12) & 0xF);
        bool ax = false, ay = false;
        const CMat& x = pp.get(b1, b2, ax);
        const CMat& y = pp.get(b3, b4, ay);
        const TraceTerms tt = trace_pair(x, ax, y, ay, diag);
        tc.t40[std::size_t(t)] = tt.t_front;
        tc.t22[std::size_t(t)] = tt.t_split;
    }
    if (max_order < 5) return tc;

    // order 5 monomials: Tr(r1 r2 r3 r4 r5 A^2), Tr(r1 r2 r3 r4 A r5 A),
    // Tr(r1 r2 r3 A r4 r5 A)
    for (int b1 = 0; b1 < n_b; ++b1)
        for (int b2 = 0; b2 < n_b; ++b2) {
            if (b2 == b1) continue;
            for (int b3 = 0; b3 < n_b; ++b3) {
                if (b3 == b1 || b3 == b2) continue;
                for (int b4 = 0; b4 < n_b; ++b4) {
                    if (b4 == b1 || b4 == b2 || b4 == b3) continue;
                    for (int b5 = 0; b5 < n_b; ++b5)
                        if (b5 != b1 && b5 != b2 && b5 != b3 && b5 != b4)
                            tc.idx5.push_back(pack5(b1, b2, b3, b4, b5));
                }
            }
        }
    tc.t50.resize(tc.idx5.size());
    tc.t41.resize(tc.idx5.size());
    tc.t32.resize(tc.idx5.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t t = 0; t < std::ptrdiff_t(tc.idx5.size()); ++t) {
        const std::uint32_t p = tc.idx5[std::size_t(t)];
        const int b1 = int(p & 0xF), b2 = int((p >> 4) & 0xF), b3 = int((p >> 8) & 0xF);
        const int b4 = int((p >> 12) & 0xF), b5 = int((p >> 16) & 0xF);
        bool a12 = false, a34 = false, a45 = false;
        const CMat& p12 = pp.get(b1, b2, a12);
        const CMat& p34 = pp.get(b3, b4, a34);
        const CMat& p45 = pp.get(b4, b5, a45);
        const CMat& r3 = shadows[std::size_t(b3)].rho_hat;
        const CMat& r5 = shadows[std::size_t(b5)].rho_hat;
        tc.t50[std::size_t(t)] =
            trace_cycle3(p12, a12, p34, a34, r5, false, nullptr, nullptr, &diag2);
        tc.t41[std::size_t(t)] =
            trace_cycle3(p12, a12, p34, a34, r5, false, nullptr, &diag, &diag);
        tc.t32[std::size_t(t)] =
            trace_cycle3(p12, a12, r3, false, p45, a45, nullptr, &diag, &diag);
    }
    return tc;
}

double falling(int m, int k) {
    double acc = 1.0;
    for (int i = 0; i < k; ++i) acc *= double(m - i);
    return acc;
}

Complex sum_excluding(const std::vector<std::uint32_t>& idx, const std::vector<Complex>& val,
                      int order, int exclude) {
    Complex acc = 0.0;
    for (std::size_t t = 0; t < idx.size(); ++t)
        if (exclude < 0 || !tuple_contains(idx[t], order, exclude)) acc += val[t];
    return acc;
}

// point estimates on the batch subset excluding `exclude` (-1: none)
struct PointEstimates {
    double f[4] = {0, 0, 0, 0};
    double purity = 0.0;
};

PointEstimates evaluate(const TermCache& tc, int exclude, int max_order, bool want_purity) {
    const int m = tc.n_b - (exclude >= 0 ? 1 : 0);
    PointEstimates pe;

    const double u2 =
        (sum_excluding(tc.idx2, tc.t20, 2, exclude) - sum_excluding(tc.idx2, tc.t11, 2, exclude))
            .real() /
        falling(m, 2);
    pe.f[0] = 4.0 * u2;
    if (want_purity)
        pe.purity = sum_excluding(tc.idx2, tc.tpur, 2, exclude).real() / falling(m, 2);
    if (max_order >= 3) {
        const double u3 = (sum_excluding(tc.idx3, tc.t30, 3, exclude) -
                           sum_excluding(tc.idx3, tc.t21, 3, exclude))
                              .real() /
                          falling(m, 3);
        pe.f[1] = 2.0 * pe.f[0] - 4.0 * u3;
        if (max_order >= 4) {
            const double u4 = (sum_excluding(tc.idx4, tc.t40, 4, exclude) -
                               sum_excluding(tc.idx4, tc.t22, 4, exclude))
                                  .real() /
                              falling(m, 4);
            pe.f[2] = 3.0 * (pe.f[1] - pe.f[0]) + 4.0 * u4;
            if (max_order >= 5) {
                const double u50 = sum_excluding(tc.idx5, tc.t50, 5, exclude).real() / falling(m, 5);
                const double u41 = sum_excluding(tc.idx5, tc.t41, 5, exclude).real() / falling(m, 5);
                const double u32 = sum_excluding(tc.idx5, tc.t32, 5, exclude).real() / falling(m, 5);
                const double u2d = pe.f[0] / 4.0;
                const double u3d = (2.0 * pe.f[0] - pe.f[1]) / 4.0;
                const double u4d = (pe.f[2] - 3.0 * (pe.f[1] - pe.f[0])) / 4.0;
                pe.f[3] = 2.0 * (8.0 * u2d - 12.0 * u3d + 8.0 * u4d) - 4.0 * u50 - 4.0 * u41 +
                          8.0 * u32;
            }
        }
    }
    return pe;
}

double jackknife_stderr(const std::vector<double>& loo) {
    const int n = int(loo.size());
    double mean = 0.0;
    for (double v : loo) mean += v;
    mean /= double(n);
    double acc = 0.0;
    for (double v : loo) acc += (v - mean) * (v - mean);
    return std::sqrt(double(n - 1) / double(n) * acc);
}

}  // namespace

CMat expand_product_operators(const RVec& weights,
                              const std::vector<Eigen::Matrix<Complex, 4, 2>>& maps) {
    const int n = int(maps.size());
    if (weights.size() != (Eigen::Index(1) << n))
        throw std::invalid_argument("expand_product_operators: weight length mismatch");

    const Eigen::Index full = Eigen::Index(1) << (2 * n);
    std::vector<Complex> cur(std::size_t(full), Complex(0.0));
    std::vector<Complex> next(std::size_t(full), Complex(0.0));
    for (Eigen::Index s = 0; s < weights.size(); ++s) cur[std::size_t(s)] = weights[s];

    // Transform qubit N first (stride 1), then move left. After step t the
    // buffer layout is [bits s_1..s_{N-t} | 4-ary ops a_{N-t+1}..a_N].
    Eigen::Index stride = 1;
    for (int t = 0; t < n; ++t) {
        const int q = n - t;  // qubit being transformed, 1-based
        const Eigen::Index prefixes = Eigen::Index(1) << (q - 1);
        const auto& b = maps[std::size_t(q - 1)];
        std::fill(next.begin(), next.begin() + prefixes * 4 * stride, Complex(0.0));
        for (Eigen::Index pre = 0; pre < prefixes; ++pre) {
            for (int sq = 0; sq < 2; ++sq) {
                const Complex* in = cur.data() + std::size_t((pre * 2 + sq) * stride);
                for (int aq = 0; aq < 4; ++aq) {
                    const Complex coeff = b(aq, sq);
                    if (coeff == Complex(0.0)) continue;
                    Complex* out = next.data() + std::size_t((pre * 4 + aq) * stride);
                    for (Eigen::Index u = 0; u < stride; ++u) out[u] += coeff * in[u];
                }
            }
        }
        cur.swap(next);
        stride *= 4;
    }

    // Buffer index is now sum_j a_j 4^{N-j} with a_j = 2 r_j + c_j:
    // interleaved row/col bits.
    const auto spread = spread_table(n);
    const Eigen::Index dim = Eigen::Index(1) << n;
    CMat out(dim, dim);
    for (Eigen::Index row = 0; row < dim; ++row)
        for (Eigen::Index col = 0; col < dim; ++col)
            out(row, col) =
                cur[std::size_t(2 * spread[std::size_t(row)] + spread[std::size_t(col)])];
    return out;
}

CMat record_average_shadow(const MeasurementRecord& rec, std::span<const double> g) {
    const int n = rec.n_qubits;
    if (int(g.size()) != n)
        throw std::invalid_argument("record_average_shadow: G vector size mismatch");

    std::vector<Eigen::Matrix<Complex, 4, 2>> maps(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        const double gj = g[std::size_t(j)];
        if (gj <= 0.5)
            throw mitigation_guard_error("survival probability <= 1/2; inversion diverges");
        const double alpha = 3.0 / (2.0 * gj - 1.0);
        const double beta = (gj - 2.0) / (2.0 * gj - 1.0);
        const Mat2& u = rec.unitaries[std::size_t(j)];
        for (int b = 0; b < 2; ++b) {
            // alpha U^dag |b><b| U + beta I, vec'd row-major
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c) {
                    Complex v = alpha * std::conj(u(b, r)) * u(b, c);
                    if (r == c) v += beta;
                    maps[std::size_t(j)](2 * r + c, b) = v;
                }
        }
    }

    RVec weights = RVec::Zero(dim_of(n));
    for (const auto& [s, cnt] : rec.counts) weights[s] = double(cnt) / double(rec.shots);
    return expand_product_operators(weights, maps);
}

std::vector<BatchShadow> build_batch_shadows(const std::vector<MeasurementRecord>& est_records,
                                             const calibration::CalibrationTable& table,
                                             int n_batches, Mode mode) {
    if (est_records.empty()) throw std::invalid_argument("build_batch_shadows: no records");
    if (n_batches < 2) throw std::invalid_argument("build_batch_shadows: need >= 2 batches");
    if (int(est_records.size()) < n_batches)
        throw std::invalid_argument("build_batch_shadows: fewer records than batches");

    const int n = est_records.front().n_qubits;

    // records sorted by (iteration, unitary)
    std::vector<const MeasurementRecord*> ordered;
    ordered.reserve(est_records.size());
    for (const auto& r : est_records) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) {
        return std::pair(a->iteration, a->unitary_index) < std::pair(b->iteration, b->unitary_index);
    });

    // batch boundaries: iteration ranges when possible, otherwise near-equal
    // contiguous blocks of the record stream
    std::vector<std::pair<std::size_t, std::size_t>> blocks;  // [first, last)
    std::vector<int> iteration_of;
    for (const auto* r : ordered) iteration_of.push_back(r->iteration);
    std::vector<int> distinct_iters = iteration_of;
    distinct_iters.erase(std::unique(distinct_iters.begin(), distinct_iters.end()),
                         distinct_iters.end());
    const int n_i = int(distinct_iters.size());

    if (n_i % n_batches == 0) {
        const int per = n_i / n_batches;
        std::size_t pos = 0;
        for (int b = 0; b < n_batches; ++b) {
            const int last_iter = distinct_iters[std::size_t((b + 1) * per - 1)];
            std::size_t end = pos;
            while (end < ordered.size() && ordered[end]->iteration <= last_iter) ++end;
            blocks.emplace_back(pos, end);
            pos = end;
        }
    } else {
        const std::size_t total = ordered.size();
        for (int b = 0; b < n_batches; ++b) {
            const std::size_t first = total * std::size_t(b) / std::size_t(n_batches);
            const std::size_t last = total * std::size_t(b + 1) / std::size_t(n_batches);
            blocks.emplace_back(first, last);
        }
    }

    // G values per iteration (checked once)
    std::map<int, std::vector<double>> g_by_iter;
    for (int i : distinct_iters) {
        std::vector<double> g(std::size_t(n), 1.0);
        if (mode == Mode::Robust)
            for (int j = 1; j <= n; ++j) g[std::size_t(j - 1)] = table.g_checked(i, j);
        g_by_iter[i] = std::move(g);
    }

    for (const auto& [first, last] : blocks)
        if (first == last) throw std::invalid_argument("build_batch_shadows: empty batch");

    std::vector<BatchShadow> batches(static_cast<std::size_t>(n_batches));
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t b = 0; b < std::ptrdiff_t(n_batches); ++b) {
        const auto [first, last] = blocks[std::size_t(b)];
        CMat acc = CMat::Zero(dim_of(n), dim_of(n));
        for (std::size_t t = first; t < last; ++t) {
            const MeasurementRecord& rec = *ordered[t];
            acc += record_average_shadow(rec, g_by_iter.at(rec.iteration));
        }
        BatchShadow bs;
        bs.rho_hat = acc / double(last - first);
        bs.batch_index = int(b) + 1;
        bs.first_iteration = ordered[first]->iteration;
        bs.last_iteration = ordered[last - 1]->iteration;
        batches[std::size_t(b)] = std::move(bs);
    }
    return batches;
}

Estimate ustat_f(std::span<const BatchShadow> shadows, const qmath::DiagonalOperator& a, int n) {
    if (n < 0 || n > 2) throw std::invalid_argument("ustat_f: order must be 0, 1 or 2");
    const int n_b = int(shadows.size());
    if (n_b <= n + 2)
        throw std::invalid_argument("ustat_f: need more than n + 2 batches");

    const TermCache tc = build_terms(shadows, a, n + 2, false);
    const PointEstimates full = evaluate(tc, -1, n + 2, false);

    std::vector<double> loo;
    loo.reserve(std::size_t(n_b));
    for (int d = 0; d < n_b; ++d) loo.push_back(evaluate(tc, d, n + 2, false).f[n]);

    Estimate est;
    est.value = full.f[n];
    est.stderr_ = jackknife_stderr(loo);
    est.n_batches = n_b;
    est.method = "u-statistic order " + std::to_string(n) + ", jackknife error";
    return est;
}

std::vector<Estimate> ustat_f_orders(std::span<const BatchShadow> shadows,
                                     const qmath::DiagonalOperator& a,
                                     const std::vector<int>& orders) {
    int max_n = 0;
    for (int n : orders) {
        if (n < 0 || n > 3) throw std::invalid_argument("ustat_f_orders: order must be in 0..3");
        max_n = std::max(max_n, n);
    }
    const int n_b = int(shadows.size());
    if (n_b <= max_n + 2)
        throw std::invalid_argument("ustat_f_orders: need more than n + 2 batches");

    const TermCache tc = build_terms(shadows, a, max_n + 2, false);
    const PointEstimates full = evaluate(tc, -1, max_n + 2, false);
    std::vector<PointEstimates> loo(static_cast<std::size_t>(n_b));
    for (int d = 0; d < n_b; ++d) loo[std::size_t(d)] = evaluate(tc, d, max_n + 2, false);

    std::vector<Estimate> out;
    for (int n : orders) {
        std::vector<double> vals;
        vals.reserve(std::size_t(n_b));
        for (const auto& pe : loo) vals.push_back(pe.f[n]);
        Estimate est;
        est.value = full.f[n];
        est.stderr_ = jackknife_stderr(vals);
        est.n_batches = n_b;
        est.method = "u-statistic order " + std::to_string(n) + ", jackknife error";
        out.push_back(est);
    }
    return out;
}

Estimate ustat_purity(std::span<const BatchShadow> shadows) {
    const int n_b = int(shadows.size());
    if (n_b < 2) throw std::invalid_argument("ustat_purity: need at least 2 batches");
    qmath::DiagonalOperator dummy;
    dummy.diagonal = RVec::Zero(shadows[0].rho_hat.rows());
    const TermCache tc = build_terms(shadows, dummy, 2, true);
    const PointEstimates full = evaluate(tc, -1, 2, true);

    Estimate est;
    est.value = full.purity;
    est.n_batches = n_b;
    est.method = "u-statistic purity, jackknife error";
    if (n_b >= 3) {
        std::vector<double> loo;
        for (int d = 0; d < n_b; ++d) loo.push_back(evaluate(tc, d, 2, true).purity);
        est.stderr_ = jackknife_stderr(loo);
    }
    return est;
}

Estimate ustat_f3(std::span<const BatchShadow> shadows, const qmath::DiagonalOperator& a) {
    const int n_b = int(shadows.size());
    if (n_b < 6) throw std::invalid_argument("ustat_f3: need at least 6 batches");

    const TermCache tc = build_terms(shadows, a, 5, false);
    const PointEstimates full = evaluate(tc, -1, 5, false);
    std::vector<double> loo;
    for (int d = 0; d < n_b; ++d) loo.push_back(evaluate(tc, d, 5, false).f[3]);

    Estimate est;
    est.value = full.f[3];
    est.stderr_ = jackknife_stderr(loo);
    est.n_batches = n_b;
    est.method = "u-statistic order 3, jackknife error";
    return est;
}

}  // namespace qfi::shadows
