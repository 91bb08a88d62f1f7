#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "czopt/numerics.hpp"

namespace czopt {

// All user-facing frequencies are linear (GHz); Hamiltonians carry the 2*pi
// internally so energies are in rad/ns and times in ns.
struct TransmonParams {
    double freq = 0.0;    // GHz
    double anharm = 0.0;  // GHz, negative
    int levels = 3;
};

struct CircuitParams {
    TransmonParams q1{4.2, -0.200, 3};
    TransmonParams coupler{6.38, -0.100, 3};
    TransmonParams q2{5.2, -0.200, 3};
    double g12 = 0.007;  // GHz
    double g1c = 0.085;
    double g2c = 0.085;

    static CircuitParams defaults(int levels = 3) {
        CircuitParams p;
        p.q1.levels = p.coupler.levels = p.q2.levels = levels;
        return p;
    }

    std::size_t dim() const {
        return static_cast<std::size_t>(q1.levels) * coupler.levels * q2.levels;
    }
    // data-qubit frequency while the gate is on
    double gate_w1() const { return q2.freq + q2.anharm; }
    void validate() const;
};

// Occupation (i, j, k) of qubit 1, coupler, qubit 2. Tensor index order puts
// qubit 1 slowest.
struct LevelLabel {
    int i = 0, j = 0, k = 0;
    bool operator==(const LevelLabel&) const = default;
    std::string str() const {
        return std::to_string(i) + std::to_string(j) + std::to_string(k);
    }
};

struct LabelingError : std::runtime_error {
    LabelingError(const std::string& what, LevelLabel offending)
        : std::runtime_error(what), label(offending) {}
    LevelLabel label;
};

// Eigenbasis at a bias point together with the bijection between bare level
// labels and eigenvector columns (assigned by maximum overlap).
class LabeledBasis {
public:
    LabeledBasis() = default;
    LabeledBasis(HermEig eig, std::vector<int> label_to_col, int d1, int dc, int d2);

    const HermEig& eig() const { return eig_; }
    int d1() const { return d1_; }
    int dc() const { return dc_; }
    int d2() const { return d2_; }
    std::size_t dim() const { return eig_.eigenvalues.size(); }

    std::size_t flat_index(const LevelLabel& l) const {
        return (static_cast<std::size_t>(l.i) * dc_ + l.j) * d2_ + l.k;
    }
    LevelLabel label_at(std::size_t flat) const {
        const int k = static_cast<int>(flat % d2_);
        const int j = static_cast<int>((flat / d2_) % dc_);
        const int i = static_cast<int>(flat / (static_cast<std::size_t>(dc_) * d2_));
        return {i, j, k};
    }

    int column_of(const LevelLabel& l) const { return label_to_col_[flat_index(l)]; }
    LevelLabel label_of_column(int col) const { return label_at(col_to_label_[col]); }
    double energy(const LevelLabel& l) const { return eig_.eigenvalues[column_of(l)]; }

private:
    HermEig eig_;
    std::vector<int> label_to_col_;  // flat bare index -> eigencolumn
    std::vector<int> col_to_label_;  // eigencolumn -> flat bare index
    int d1_ = 0, dc_ = 0, d2_ = 0;
};

// Computational basis order used everywhere downstream: 000, 001, 100, 101.
const std::vector<LevelLabel>& computational_labels();

// Circuit Hamiltonian on the d1*dc*d2 tensor-product space, in rad/ns.
// wc replaces the coupler frequency; w1_override, when set, replaces the
// qubit-1 frequency (used while the gate is on).
ComplexMatrix build_hamiltonian(const CircuitParams& p, double wc_ghz,
                                std::optional<double> w1_override_ghz = std::nullopt);

// diag(j) on the full space: derivative of the Hamiltonian along wc is
// 2*pi * coupler_number_op.
ComplexMatrix coupler_number_op(const CircuitParams& p);

LabeledBasis idle_eigenbasis(const CircuitParams& p);

// Residual longitudinal coupling (E101 - E100 - E001 + E000)/2pi in kHz.
double zz_coupling(const CircuitParams& p);

// Schrieffer-Wolff transverse coupling g12 + g1c g2c (1/D1c + 1/D2c)/2 in MHz,
// evaluated at the idle bias of p.
double xx_coupling_sw(const CircuitParams& p);
// Same formula at an arbitrary (w1, w2, wc) bias.
double xx_coupling_sw_at(const CircuitParams& p, double w1_ghz, double w2_ghz, double wc_ghz);

// 1 - exp(-t_gate / t_coh)
double decoherence_error(double t_gate_ns, double t_coh_ns);

}  // namespace czopt
