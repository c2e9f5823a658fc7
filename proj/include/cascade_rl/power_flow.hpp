#pragma once

#include "cascade_rl/dispatch.hpp"
#include "cascade_rl/network.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <vector>

namespace cascade_rl {

/// Net active injection per bus, generation-positive, p.u.
struct InjectionVector {
    std::vector<double> p;
};

struct DcFlowResult {
    std::vector<double> theta; // rad per bus, slack at 0
    std::vector<double> flow;  // p.u. per branch record (0 when out of service)
};

struct AcOptions {
    int max_iterations = 30;
    double tolerance = 1e-6;
    int max_retype_passes = 2;
};

struct PfSolution {
    bool converged = false;
    int iterations = 0;
    double max_mismatch = 0.0;
    std::vector<double> v;
    std::vector<double> theta;
    std::vector<double> p_inj;
    std::vector<double> q_inj;
    std::vector<double> flow_from; // active power at the from-end, per branch record
    std::vector<double> loading;   // |flow_from| / rate, 0 for out-of-service records
    std::vector<bool> q_clamped;   // PV bus switched to PQ at a reactive limit
};

using ComplexMatrix = Eigen::MatrixXcd;

/// Dense nodal admittance matrix over in-service branches (pi model, no taps).
ComplexMatrix build_ybus(const Network& net);

/// Linear DC model: B*theta = p with the slack angle fixed at zero and
/// flow = (theta_from - theta_to) / x. Throws NumericalError when the
/// in-service branches do not connect every bus.
DcFlowResult dc_power_flow(const Network& net, const InjectionVector& inj);

/// Full Newton-Raphson on the polar mismatch equations from a flat start.
/// Non-convergence is reported through `converged`, never thrown.
PfSolution ac_power_flow(const Network& net, const DispatchResult& dispatch, const AcOptions& options = {});

/// Per-bus specified injections implied by a dispatch (generation minus
/// served load); reactive demand is scaled with the served fraction.
struct BusInjections {
    std::vector<double> p;
    std::vector<double> q;
};
BusInjections dispatch_injections(const Network& net, const DispatchResult& dispatch);

} // namespace cascade_rl
