#pragma once

#include "cascade_rl/dispatch.hpp"
#include "cascade_rl/lp.hpp"
#include "cascade_rl/network.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>

namespace cascade_rl {

/// Power transfer distribution factors: rows are branch records (zero rows for
/// out-of-service branches), columns are bus positions, slack column zero.
struct Ptdf {
    Eigen::MatrixXd matrix;
    std::size_t slack = 0;
};

/// Throws NumericalError when the in-service branches leave the network disconnected.
Ptdf build_ptdf(const Network& net);
Ptdf build_ptdf(const Network& net, int slack_bus_id);

/// Hash of everything the PTDF depends on (bus ids, slack, in-service branch
/// endpoints and reactances).
std::uint64_t topology_hash(const Network& net);

/// Memoises PTDFs by topology hash. Thread-safe; entries are immutable.
class PtdfCache {
public:
    explicit PtdfCache(std::size_t capacity = 256) : capacity_(capacity) {}

    std::shared_ptr<const Ptdf> get(const Network& net);
    std::size_t size() const;

private:
    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::map<std::uint64_t, std::shared_ptr<const Ptdf>> entries_;
};

/// The DCOPF linear program. Variable order: one per generator record, then
/// one per load record (load variables in [-p_demand, 0], injection sign
/// convention); out-of-service records are fixed at zero.
struct DcopfProblem {
    LpProblem lp;
    std::vector<std::size_t> flow_row_branch; // branch record behind each inequality row
    std::size_t n_gen_vars = 0;
};

/// Builds the LP with flow limits alpha * rate on every in-service branch
/// and a single power-balance equality row.
DcopfProblem assemble_lp(const Network& net, const Ptdf& ptdf, double alpha);

/// Corrective dispatch. Returns feasible=false when the LP is infeasible or
/// no generator is in service; propagates NumericalError from the solver.
DispatchResult run_dcopf(const Network& net, double alpha, PtdfCache* cache = nullptr);

/// Same as run_dcopf but also hands back the LP and its solution for audits.
struct DcopfAudit {
    DispatchResult dispatch;
    DcopfProblem problem;
    LpSolution solution;
};
DcopfAudit run_dcopf_audited(const Network& net, double alpha, PtdfCache* cache = nullptr);

} // namespace cascade_rl
