#pragma once

#include <Eigen/Dense>
#include <vector>

namespace tptomo {

/// Diagonal of a density matrix in the Fock basis: probs[m] is the
/// probability of finding m photons, m = 0..cutoff.
struct PhotonDistribution {
    std::vector<double> probs;
    int cutoff = 0;

    PhotonDistribution() = default;
    explicit PhotonDistribution(std::vector<double> p);

    double sum() const;
    double mean() const;

    /// Scales entries to unit sum. Throws if the total is not positive.
    void normalize();

    /// Entries nonnegative and summing to 1 within tol.
    bool is_normalized(double tol = 1e-9) const;
};

/// Geometric photon-number diagonal of a thermal state with the given mean.
/// Entries are sigma_n = mean^n / (1+mean)^(n+1); the truncated tail mass is
/// reported, never folded back into the entries.
struct ThermalDiagonal {
    double mean = 0.0;
    std::vector<double> probs;
    int cutoff = 0;

    double tail_mass() const;  // exact geometric tail beyond cutoff
};

ThermalDiagonal thermal_diagonal(double mean, int cutoff);

/// Smallest cutoff N with (mean/(1+mean))^(N+1) <= tail_tol.
int probe_cutoff_for(double mean, double tail_tol);

/// Two-mode beam-splitter unitary truncated to total photon number <= cutoff.
/// Photon number is conserved, so the operator is block diagonal over
/// fixed-total subspaces; only those blocks are stored. Block s is indexed by
/// the photon number in the first (signal) mode: block(s)(k, m) is the
/// amplitude <k, s-k| U |m, s-m>.
///
/// Convention: t = sqrt(T) and r = sqrt(1-T) both real and nonnegative. Only
/// squared moduli enter the detection model, so the phase convention is
/// observationally irrelevant here.
class BsUnitary {
public:
    BsUnitary(double transmissivity, int cutoff, std::vector<Eigen::MatrixXd> blocks)
        : transmissivity_(transmissivity), cutoff_(cutoff), blocks_(std::move(blocks)) {}

    double transmissivity() const { return transmissivity_; }
    int cutoff() const { return cutoff_; }

    const Eigen::MatrixXd& block(int total) const { return blocks_.at(total); }

    /// Element U^{kl}_{mn}; zero when k+l != m+n.
    double element(int k, int l, int m, int n) const;

private:
    double transmissivity_;
    int cutoff_;
    std::vector<Eigen::MatrixXd> blocks_;
};

/// Beam-splitter unitary from the closed combinatorial double sum.
BsUnitary bs_unitary(double transmissivity, int cutoff);

/// Same operator computed by matrix exponentiation of the two-mode generator
/// theta*(a^dag b - a b^dag), theta = arccos(sqrt(T)), block by block. Shares
/// no code with bs_unitary; used to cross-check it.
BsUnitary bs_unitary_oracle(double transmissivity, int cutoff);

}  // namespace tptomo
