#pragma once

// Synthetic option chains priced with the Black-Scholes oracle.

#include "oracles.hpp"
#include "vmot/market_data.hpp"

#include <vector>

namespace fixture {

inline std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) v[static_cast<std::size_t>(k)] = lo + (hi - lo) * k / (n - 1);
    return v;
}

inline vmot::OptionChain bs_chain(double spot, double vol, double t, const std::vector<double>& strikes) {
    vmot::OptionChain ch;
    ch.asset = "SYN";
    ch.spot = spot;
    for (double k : strikes) ch.rows.push_back({k, oracle::bs_call(spot, k, vol, t), oracle::bs_put(spot, k, vol, t)});
    return ch;
}

}  // namespace fixture
