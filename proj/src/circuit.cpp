#include "czopt/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace czopt {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double single_energy(const TransmonParams& t, int m) {
    return t.freq * m + 0.5 * t.anharm * m * (m - 1);
}

// ladder matrix element <m|(b + b^dag)|m'> is sqrt(max(m,m')) for |m-m'|=1
double x_elem(int m, int m2) { return std::sqrt(static_cast<double>(std::max(m, m2))); }

}  // namespace

void CircuitParams::validate() const {
    for (const TransmonParams* t : {&q1, &coupler, &q2}) {
        if (t->freq <= 0.0) throw PreconditionError("CircuitParams: frequency must be positive");
        if (t->anharm >= 0.0) throw PreconditionError("CircuitParams: anharmonicity must be negative");
        if (t->levels < 3) throw PreconditionError("CircuitParams: need at least 3 levels per transmon");
    }
    if (g12 < 0.0 || g1c < 0.0 || g2c < 0.0)
        throw PreconditionError("CircuitParams: couplings must be non-negative");
    // perturbative hierarchy; decoupled limits (zeroed couplings) stay legal
    if (g1c > 0.0 && g2c > 0.0 && (g12 >= g1c || g12 >= g2c))
        throw PreconditionError("CircuitParams: perturbative hierarchy g12 < g1c, g2c violated");
}

const std::vector<LevelLabel>& computational_labels() {
    static const std::vector<LevelLabel> labels = {
        {0, 0, 0}, {0, 0, 1}, {1, 0, 0}, {1, 0, 1}};
    return labels;
}

ComplexMatrix build_hamiltonian(const CircuitParams& p, double wc_ghz,
                                std::optional<double> w1_override_ghz) {
    if (w1_override_ghz && *w1_override_ghz <= 0.0)
        throw PreconditionError("build_hamiltonian: w1 override must be positive");
    TransmonParams t1 = p.q1;
    if (w1_override_ghz) t1.freq = *w1_override_ghz;
    TransmonParams tc = p.coupler;
    tc.freq = wc_ghz;
    const TransmonParams& t2 = p.q2;

    const int d1 = t1.levels, dc = tc.levels, d2 = t2.levels;
    const std::size_t dim = static_cast<std::size_t>(d1) * dc * d2;
    ComplexMatrix h(dim, dim);

    auto idx = [&](int i, int j, int k) {
        return (static_cast<std::size_t>(i) * dc + j) * d2 + k;
    };

    for (int i = 0; i < d1; ++i) {
        for (int j = 0; j < dc; ++j) {
            for (int k = 0; k < d2; ++k) {
                const std::size_t r = idx(i, j, k);
                h(r, r) = kTwoPi * (single_energy(t1, i) + single_energy(tc, j) + single_energy(t2, k));
                // g12 (b1+b1^dag)(b2+b2^dag)
                for (int i2 : {i - 1, i + 1}) {
                    if (i2 < 0 || i2 >= d1) continue;
                    for (int k2 : {k - 1, k + 1}) {
                        if (k2 < 0 || k2 >= d2) continue;
                        h(r, idx(i2, j, k2)) += kTwoPi * p.g12 * x_elem(i, i2) * x_elem(k, k2);
                    }
                    // g1c (b1+b1^dag)(bc+bc^dag)
                    for (int j2 : {j - 1, j + 1}) {
                        if (j2 < 0 || j2 >= dc) continue;
                        h(r, idx(i2, j2, k)) += kTwoPi * p.g1c * x_elem(i, i2) * x_elem(j, j2);
                    }
                }
                // g2c (b2+b2^dag)(bc+bc^dag)
                for (int k2 : {k - 1, k + 1}) {
                    if (k2 < 0 || k2 >= d2) continue;
                    for (int j2 : {j - 1, j + 1}) {
                        if (j2 < 0 || j2 >= dc) continue;
                        h(r, idx(i, j2, k2)) += kTwoPi * p.g2c * x_elem(k, k2) * x_elem(j, j2);
                    }
                }
            }
        }
    }
    return h;
}

ComplexMatrix coupler_number_op(const CircuitParams& p) {
    const int d1 = p.q1.levels, dc = p.coupler.levels, d2 = p.q2.levels;
    const std::size_t dim = static_cast<std::size_t>(d1) * dc * d2;
    ComplexMatrix n(dim, dim);
    std::size_t r = 0;
    for (int i = 0; i < d1; ++i)
        for (int j = 0; j < dc; ++j)
            for (int k = 0; k < d2; ++k, ++r) n(r, r) = static_cast<double>(j);
    return n;
}

LabeledBasis::LabeledBasis(HermEig eig, std::vector<int> label_to_col, int d1, int dc, int d2)
    : eig_(std::move(eig)), label_to_col_(std::move(label_to_col)), d1_(d1), dc_(dc), d2_(d2) {
    col_to_label_.assign(label_to_col_.size(), -1);
    for (std::size_t flat = 0; flat < label_to_col_.size(); ++flat) {
        const int col = label_to_col_[flat];
        if (col < 0 || col_to_label_[col] != -1)
            throw LabelingError("LabeledBasis: label map is not a bijection", label_at(flat));
        col_to_label_[col] = static_cast<int>(flat);
    }
}

LabeledBasis idle_eigenbasis(const CircuitParams& p) {
    p.validate();
    HermEig eig = herm_eig(build_hamiltonian(p, p.coupler.freq));
    const std::size_t dim = eig.eigenvalues.size();

    // Greedy assignment by descending overlap magnitude. Candidate pairs with
    // overlap^2 below the ambiguity threshold are useless for labeling, so
    // they are visited last and trigger the threshold error below if chosen.
    struct Pair {
        double ov2;
        std::size_t flat, col;
    };
    std::vector<Pair> pairs;
    pairs.reserve(dim * dim);
    for (std::size_t flat = 0; flat < dim; ++flat)
        for (std::size_t col = 0; col < dim; ++col)
            pairs.push_back({std::norm(eig.eigenvectors(flat, col)), flat, col});
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        return a.ov2 > b.ov2;
    });

    std::vector<int> label_to_col(dim, -1);
    std::vector<char> col_used(dim, 0);
    std::size_t assigned = 0;
    for (const Pair& pr : pairs) {
        if (assigned == dim) break;
        if (label_to_col[pr.flat] != -1 || col_used[pr.col]) continue;
        label_to_col[pr.flat] = static_cast<int>(pr.col);
        col_used[pr.col] = 1;
        ++assigned;
    }

    LabeledBasis basis(std::move(eig), std::move(label_to_col), p.q1.levels, p.coupler.levels,
                       p.q2.levels);
    for (std::size_t flat = 0; flat < dim; ++flat) {
        const LevelLabel l = basis.label_at(flat);
        const double ov2 = std::norm(basis.eig().eigenvectors(flat, basis.column_of(l)));
        if (ov2 <= 0.5)
            throw LabelingError("idle_eigenbasis: ambiguous label |" + l.str() +
                                    "> has best overlap^2 " + std::to_string(ov2),
                                l);
    }
    return basis;
}

double zz_coupling(const CircuitParams& p) {
    const LabeledBasis basis = idle_eigenbasis(p);
    const double e101 = basis.energy({1, 0, 1});
    const double e100 = basis.energy({1, 0, 0});
    const double e001 = basis.energy({0, 0, 1});
    const double e000 = basis.energy({0, 0, 0});
    return (e101 - e100 - e001 + e000) / kTwoPi * 1e6;  // rad/ns -> GHz -> kHz
}

double xx_coupling_sw_at(const CircuitParams& p, double w1_ghz, double w2_ghz, double wc_ghz) {
    const double d1c = w1_ghz - wc_ghz;
    const double d2c = w2_ghz - wc_ghz;
    if (d1c == 0.0 || d2c == 0.0)
        throw PreconditionError("xx_coupling_sw: zero qubit-coupler detuning");
    return (p.g12 + 0.5 * p.g1c * p.g2c * (1.0 / d1c + 1.0 / d2c)) * 1e3;  // GHz -> MHz
}

double xx_coupling_sw(const CircuitParams& p) {
    return xx_coupling_sw_at(p, p.q1.freq, p.q2.freq, p.coupler.freq);
}

double decoherence_error(double t_gate_ns, double t_coh_ns) {
    if (t_coh_ns <= 0.0) throw PreconditionError("decoherence_error: coherence time must be positive");
    if (t_gate_ns < 0.0) throw PreconditionError("decoherence_error: gate time must be non-negative");
    return 1.0 - std::exp(-t_gate_ns / t_coh_ns);
}

}  // namespace czopt
