#include "tptomo/fock.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "tptomo/errors.hpp"

namespace tptomo {

PhotonDistribution::PhotonDistribution(std::vector<double> p) : probs(std::move(p)) {
    if (probs.empty()) throw std::invalid_argument("PhotonDistribution: empty probability vector");
    for (double v : probs)
        if (v < 0.0) throw std::invalid_argument("PhotonDistribution: negative entry");
    cutoff = static_cast<int>(probs.size()) - 1;
}

double PhotonDistribution::sum() const {
    return std::accumulate(probs.begin(), probs.end(), 0.0);
}

double PhotonDistribution::mean() const {
    double m = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) m += static_cast<double>(i) * probs[i];
    return m;
}

void PhotonDistribution::normalize() {
    const double s = sum();
    if (s <= 0.0) throw std::invalid_argument("PhotonDistribution: cannot normalize zero vector");
    for (double& v : probs) v /= s;
}

bool PhotonDistribution::is_normalized(double tol) const {
    for (double v : probs)
        if (v < 0.0) return false;
    return std::abs(sum() - 1.0) <= tol;
}

double ThermalDiagonal::tail_mass() const {
    if (mean <= 0.0) return 0.0;
    const double q = mean / (1.0 + mean);
    return std::pow(q, cutoff + 1);
}

ThermalDiagonal thermal_diagonal(double mean, int cutoff) {
    if (mean < 0.0) throw std::invalid_argument("thermal_diagonal: negative mean");
    if (cutoff < 0) throw std::invalid_argument("thermal_diagonal: negative cutoff");
    ThermalDiagonal td;
    td.mean = mean;
    td.cutoff = cutoff;
    td.probs.resize(cutoff + 1);
    const double q = mean / (1.0 + mean);
    double v = 1.0 / (1.0 + mean);
    for (int n = 0; n <= cutoff; ++n) {
        td.probs[n] = v;
        v *= q;
    }
    return td;
}

int probe_cutoff_for(double mean, double tail_tol) {
    if (mean < 0.0) throw std::invalid_argument("probe_cutoff_for: negative mean");
    if (!(tail_tol > 0.0 && tail_tol < 1.0))
        throw std::invalid_argument("probe_cutoff_for: tail_tol outside (0,1)");
    if (mean == 0.0) return 0;
    const double q = mean / (1.0 + mean);
    // (q)^(N+1) <= tol  <=>  N+1 >= log(tol)/log(q)
    int n = static_cast<int>(std::ceil(std::log(tail_tol) / std::log(q))) - 1;
    if (n < 0) n = 0;
    // floating-point guard around the boundary
    while (std::pow(q, n + 1) > tail_tol) ++n;
    while (n > 0 && std::pow(q, n) <= tail_tol) --n;
    return n;
}

double BsUnitary::element(int k, int l, int m, int n) const {
    if (k < 0 || l < 0 || m < 0 || n < 0) return 0.0;
    if (k + l != m + n) return 0.0;
    const int s = k + l;
    if (s > cutoff_) throw std::out_of_range("BsUnitary: total photon number beyond cutoff");
    return blocks_[s](k, m);
}

namespace {

std::vector<double> log_factorials(int n) {
    std::vector<double> lf(n + 1);
    for (int i = 0; i <= n; ++i) lf[i] = std::lgamma(i + 1.0);
    return lf;
}

}  // namespace

BsUnitary bs_unitary(double transmissivity, int cutoff) {
    if (transmissivity < 0.0 || transmissivity > 1.0)
        throw std::invalid_argument("bs_unitary: transmissivity outside [0,1]");
    if (cutoff < 0) throw std::invalid_argument("bs_unitary: negative cutoff");

    const double t = std::sqrt(transmissivity);
    const double r = std::sqrt(1.0 - transmissivity);
    const double logt = t > 0.0 ? std::log(t) : 0.0;
    const double logr = r > 0.0 ? std::log(r) : 0.0;
    const auto lf = log_factorials(2 * cutoff);

    std::vector<Eigen::MatrixXd> blocks;
    blocks.reserve(cutoff + 1);
    for (int s = 0; s <= cutoff; ++s) {
        Eigen::MatrixXd block = Eigen::MatrixXd::Zero(s + 1, s + 1);
        for (int k = 0; k <= s; ++k) {
            const int l = s - k;
            for (int m = 0; m <= s; ++m) {
                const int n = s - m;
                // Kronecker deltas force h = l + g - m; the double sum
                // collapses to one index.
                const double pref = 0.5 * (lf[k] + lf[l] + lf[m] + lf[n]);
                double acc = 0.0;
                for (int g = 0; g <= k; ++g) {
                    const int h = l + g - m;
                    if (h < 0 || h > l) continue;
                    const int tp = g + h;          // power of t
                    const int rp = k + l - g - h;  // power of r
                    if (t == 0.0 && tp > 0) continue;
                    if (r == 0.0 && rp > 0) continue;
                    const double logmag =
                        pref + tp * logt + rp * logr - lf[g] - lf[h] - lf[k - g] - lf[l - h];
                    const double sign = ((k - g) % 2 == 0) ? 1.0 : -1.0;
                    acc += sign * std::exp(logmag);
                }
                block(k, m) = acc;
            }
        }
        blocks.push_back(std::move(block));
    }
    return BsUnitary(transmissivity, cutoff, std::move(blocks));
}

BsUnitary bs_unitary_oracle(double transmissivity, int cutoff) {
    if (transmissivity < 0.0 || transmissivity > 1.0)
        throw std::invalid_argument("bs_unitary_oracle: transmissivity outside [0,1]");
    if (cutoff < 0) throw std::invalid_argument("bs_unitary_oracle: negative cutoff");

    const double theta = std::acos(std::sqrt(transmissivity));
    std::vector<Eigen::MatrixXd> blocks;
    blocks.reserve(cutoff + 1);
    for (int s = 0; s <= cutoff; ++s) {
        // Generator of a^dag b - a b^dag on the s-photon subspace, basis
        // |k, s-k>: a^dag b |k,l> = sqrt((k+1)l) |k+1,l-1>.
        Eigen::MatrixXd gen = Eigen::MatrixXd::Zero(s + 1, s + 1);
        for (int k = 0; k < s; ++k) {
            const double c = std::sqrt(static_cast<double>(k + 1) * (s - k));
            gen(k + 1, k) += c;
            gen(k, k + 1) -= c;
        }
        blocks.push_back((theta * gen).exp());
    }
    return BsUnitary(transmissivity, cutoff, std::move(blocks));
}

}  // namespace tptomo
