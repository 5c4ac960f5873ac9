#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "relaysim/abc.hpp"
#include "relaysim/numerics.hpp"

namespace relaysim {

/// Model pieces for a likelihood-free Metropolis chain over an arbitrary
/// parameter type. `log_q_ratio(from, to)` is log q(from | to) - log q(to | from)
/// and may be left empty for symmetric proposals.
template <class Param, class Data>
struct GenericAbcModel {
    std::function<double(const Param&)> log_prior;
    std::function<Param(const Param&, RngStream&)> propose;
    std::function<double(const Param&, const Param&)> log_q_ratio;
    std::function<Data(const Param&, RngStream&)> simulate;
    std::function<double(const Data&, const Data&)> distance;
};

template <class Param>
struct GenericAbcRun {
    std::vector<Param> states;
    std::size_t accepted = 0;
};

/// Metropolis-Hastings with the likelihood replaced by the weight of one
/// simulated dataset. The weight of the current state is the one stored when
/// it was accepted; a zero current weight (initial state) falls back to the
/// prior and proposal ratio alone.
template <class Param, class Data>
GenericAbcRun<Param> run_generic_abc(const GenericAbcModel<Param, Data>& model, const Data& y,
                                     const WeightingFunction& weighting, Param initial, std::size_t iterations,
                                     RngStream& rng) {
    GenericAbcRun<Param> run;
    run.states.reserve(iterations);
    Param current = std::move(initial);
    double current_log_w = -std::numeric_limits<double>::infinity();
    double current_log_prior = model.log_prior(current);
    for (std::size_t n = 0; n < iterations; ++n) {
        Param proposal = model.propose(current, rng);
        const double proposal_log_prior = model.log_prior(proposal);
        if (proposal_log_prior > -std::numeric_limits<double>::infinity()) {
            const double log_w = weighting.log_weight(model.distance(y, model.simulate(proposal, rng)));
            if (log_w > -std::numeric_limits<double>::infinity()) {
                double log_alpha = proposal_log_prior - current_log_prior;
                if (model.log_q_ratio) log_alpha += model.log_q_ratio(current, proposal);
                if (std::isfinite(current_log_w)) log_alpha += log_w - current_log_w;
                if (log_alpha >= 0.0 || std::log(rng.uniform()) < log_alpha) {
                    current = std::move(proposal);
                    current_log_prior = proposal_log_prior;
                    current_log_w = log_w;
                    ++run.accepted;
                }
            }
        }
        run.states.push_back(current);
    }
    return run;
}

}  // namespace relaysim
