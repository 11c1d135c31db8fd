#pragma once

#include "vmot/distributions.hpp"

#include <optional>
#include <string>
#include <vector>

namespace vmot {

struct OptionQuote {
    double strike = 0.0;
    std::optional<double> call;
    std::optional<double> put;
};

struct OptionChain {
    std::string asset;
    std::string as_of;
    std::string expiry;
    double spot = 0.0;
    std::vector<OptionQuote> rows;   // strictly increasing strikes
    std::vector<std::string> warnings;

    /// Positive spot, positive strictly increasing strikes, nonnegative prices.
    void validate() const;
};

/// CSV with header strike,call,put; blank price cells are allowed. Rows are
/// sorted by strike (with a warning when the input was unsorted); duplicate
/// strikes are rejected.
OptionChain load_chain(const std::string& path, double spot, std::string asset = "", std::string as_of = "",
                       std::string expiry = "");
void save_chain(const OptionChain& chain, const std::string& path);

struct ImpliedDensity {
    std::vector<double> strikes;
    std::vector<double> density;
    bool normalized = false;
    /// Trapezoid mass of the cleaned second differences before renormalization.
    double raw_mass = 0.0;
    std::vector<std::string> diagnostics;

    /// Trapezoid integral of the density.
    double mass() const;
    /// Integral of (K - k)+ against the piecewise linear density.
    double call_price(double k) const;
    /// CSV columns strike,density.
    void save_csv(const std::string& path) const;
    static ImpliedDensity load_csv(const std::string& path);
};

struct ExtractionOptions {
    /// Slack on convexity and monotonicity, in units of spot.
    double arbitrage_slack = 1e-8;
    /// Clip second differences in [-clip_tol, 0) to zero.
    double clip_tol = 1e-8;
};

/// Breeden-Litzenberger: puts below spot, calls above, arbitrage-violating
/// quotes removed, second divided differences at interior strikes, density
/// set to zero outside the usable range and renormalized to unit mass.
/// Throws ExtractionError when fewer than three usable quotes remain on a side.
ImpliedDensity implied_density(const OptionChain& chain, const ExtractionOptions& opt = {});

/// Law of (K - ref) / ref under the density, tabulated by cumulative trapezoid.
Marginal1D to_return_marginal(const ImpliedDensity& dens, double ref_price);

/// Translate a Tabulated or Discrete marginal so its mean equals `target`.
Marginal1D recenter(const Marginal1D& m, double target);

}  // namespace vmot
