#include "cascade_rl/error.hpp"
#include "cascade_rl/lp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cascade_rl {

void LpProblem::check() const {
    const std::size_t n = cost.size();
    if (lower.size() != n || upper.size() != n)
        throw ConfigError("LP bound vectors do not match the number of variables");
    for (std::size_t j = 0; j < n; ++j)
        if (!(lower[j] <= upper[j]))
            throw ConfigError("LP variable " + std::to_string(j) + " has lower > upper");
    if (eq_rows.rows() > 0 && static_cast<std::size_t>(eq_rows.cols()) != n)
        throw ConfigError("LP equality rows have the wrong width");
    if (ineq_rows.rows() > 0 && static_cast<std::size_t>(ineq_rows.cols()) != n)
        throw ConfigError("LP inequality rows have the wrong width");
    if (eq_rhs.size() != static_cast<std::size_t>(eq_rows.rows()))
        throw ConfigError("LP equality right-hand side has the wrong length");
    if (ineq_lower.size() != static_cast<std::size_t>(ineq_rows.rows()) ||
        ineq_upper.size() != static_cast<std::size_t>(ineq_rows.rows()))
        throw ConfigError("LP inequality bounds have the wrong length");
    for (std::size_t r = 0; r < ineq_lower.size(); ++r)
        if (!(ineq_lower[r] <= ineq_upper[r]))
            throw ConfigError("LP inequality row " + std::to_string(r) + " has lower > upper");
}

namespace {

enum class VarState { basic, at_lower, at_upper, at_zero };

// Working form: [A_struct | -I (row slacks) | diag(sign) (artificials)] z = b.
class BoundedSimplex {
public:
    BoundedSimplex(const LpProblem& lp, const SimplexOptions& opt) : lp_(lp), opt_(opt) {
        n_ = static_cast<Eigen::Index>(lp.n_vars());
        me_ = lp.eq_rows.rows();
        mi_ = lp.ineq_rows.rows();
        m_ = me_ + mi_;
        a_.resize(m_, n_);
        if (me_ > 0)
            a_.topRows(me_) = lp.eq_rows;
        if (mi_ > 0)
            a_.bottomRows(mi_) = lp.ineq_rows;
        b_ = Eigen::VectorXd::Zero(m_);
        for (Eigen::Index i = 0; i < me_; ++i)
            b_(i) = lp.eq_rhs[static_cast<std::size_t>(i)];

        total_ = n_ + mi_ + m_;
        lo_.assign(static_cast<std::size_t>(total_), 0.0);
        up_.assign(static_cast<std::size_t>(total_), kInf);
        for (Eigen::Index j = 0; j < n_; ++j) {
            lo_[idx(j)] = lp.lower[idx(j)];
            up_[idx(j)] = lp.upper[idx(j)];
        }
        for (Eigen::Index r = 0; r < mi_; ++r) {
            lo_[idx(n_ + r)] = lp.ineq_lower[idx(r)];
            up_[idx(n_ + r)] = lp.ineq_upper[idx(r)];
        }
        art_sign_.assign(static_cast<std::size_t>(m_), 1.0);
        state_.assign(static_cast<std::size_t>(total_), VarState::at_lower);
        value_.assign(static_cast<std::size_t>(total_), 0.0);
        head_.assign(static_cast<std::size_t>(m_), 0);
    }

    LpSolution run() {
        const bool need_phase1 = crash();
        LpSolution sol;
        if (need_phase1) {
            std::vector<double> c1(static_cast<std::size_t>(total_), 0.0);
            for (Eigen::Index i = 0; i < m_; ++i)
                c1[idx(artificial(i))] = 1.0;
            iterate(c1);
            refactor();
            double infeas = 0.0;
            for (Eigen::Index i = 0; i < m_; ++i)
                infeas += value_[idx(artificial(i))];
            if (infeas > 10.0 * opt_.feasibility_tol) {
                sol.status = LpStatus::infeasible;
                sol.iterations = iterations_;
                sol.infeasibility = infeas;
                return sol;
            }
        }
        for (Eigen::Index i = 0; i < m_; ++i)
            up_[idx(artificial(i))] = 0.0;

        std::vector<double> c2(static_cast<std::size_t>(total_), 0.0);
        for (Eigen::Index j = 0; j < n_; ++j)
            c2[idx(j)] = lp_.cost[idx(j)];
        iterate(c2);
        refactor();

        sol.status = LpStatus::optimal;
        sol.iterations = iterations_;
        sol.x.assign(value_.begin(), value_.begin() + n_);
        sol.objective = lp_.offset;
        for (Eigen::Index j = 0; j < n_; ++j)
            sol.objective += lp_.cost[idx(j)] * sol.x[idx(j)];

        const Eigen::VectorXd y = duals(c2);
        sol.duals.eq.assign(y.data(), y.data() + me_);
        sol.duals.ineq.assign(y.data() + me_, y.data() + m_);
        sol.duals.reduced.resize(static_cast<std::size_t>(n_));
        for (Eigen::Index j = 0; j < n_; ++j)
            sol.duals.reduced[idx(j)] = lp_.cost[idx(j)] - a_.col(j).dot(y);
        return sol;
    }

private:
    static std::size_t idx(Eigen::Index i) { return static_cast<std::size_t>(i); }
    Eigen::Index artificial(Eigen::Index row) const { return n_ + mi_ + row; }

    // Column j of the working matrix, dense.
    Eigen::VectorXd column(Eigen::Index j) const {
        if (j < n_)
            return a_.col(j);
        Eigen::VectorXd c = Eigen::VectorXd::Zero(m_);
        if (j < n_ + mi_)
            c(me_ + (j - n_)) = -1.0;
        else
            c(j - n_ - mi_) = art_sign_[idx(j - n_ - mi_)];
        return c;
    }

    // Reduced cost of nonbasic column j given simplex multipliers y.
    double reduced_cost(const std::vector<double>& c, const Eigen::VectorXd& y, Eigen::Index j) const {
        if (j < n_)
            return c[idx(j)] - a_.col(j).dot(y);
        if (j < n_ + mi_)
            return c[idx(j)] + y(me_ + (j - n_));
        const Eigen::Index row = j - n_ - mi_;
        return c[idx(j)] - art_sign_[idx(row)] * y(row);
    }

    static double nearest_bound(double lo, double up, VarState& st) {
        if (std::isinf(lo) && std::isinf(up)) {
            st = VarState::at_zero;
            return 0.0;
        }
        if (std::isinf(up) || (!std::isinf(lo) && std::abs(lo) <= std::abs(up))) {
            st = VarState::at_lower;
            return lo;
        }
        st = VarState::at_upper;
        return up;
    }

    // Nonbasic structurals start at the bound nearest zero; row slacks are
    // basic where the resulting activity is inside the band, otherwise the
    // row receives an artificial. Returns whether any artificial is positive.
    bool crash() {
        for (Eigen::Index j = 0; j < n_; ++j)
            value_[idx(j)] = nearest_bound(lo_[idx(j)], up_[idx(j)], state_[idx(j)]);
        Eigen::VectorXd xs(n_);
        for (Eigen::Index j = 0; j < n_; ++j)
            xs(j) = value_[idx(j)];
        const Eigen::VectorXd activity = a_ * xs;

        binv_ = Eigen::MatrixXd::Zero(m_, m_);
        bool positive = false;
        for (Eigen::Index i = 0; i < m_; ++i) {
            const Eigen::Index art = artificial(i);
            if (i >= me_) {
                const Eigen::Index s = n_ + (i - me_);
                const double act = activity(i);
                if (act >= lo_[idx(s)] && act <= up_[idx(s)]) {
                    head_[idx(i)] = s;
                    state_[idx(s)] = VarState::basic;
                    value_[idx(s)] = act;
                    binv_(i, i) = -1.0;
                    state_[idx(art)] = VarState::at_lower;
                    value_[idx(art)] = 0.0;
                    continue;
                }
                // Slack parks at the violated bound; the artificial absorbs the gap.
                value_[idx(s)] = act < lo_[idx(s)] ? lo_[idx(s)] : up_[idx(s)];
                state_[idx(s)] = act < lo_[idx(s)] ? VarState::at_lower : VarState::at_upper;
            }
            const double slack_part = i >= me_ ? -value_[idx(n_ + (i - me_))] : 0.0;
            const double resid = b_(i) - activity(i) - slack_part;
            art_sign_[idx(i)] = resid >= 0.0 ? 1.0 : -1.0;
            head_[idx(i)] = art;
            state_[idx(art)] = VarState::basic;
            value_[idx(art)] = std::abs(resid);
            binv_(i, i) = art_sign_[idx(i)];
            if (std::abs(resid) > 0.0)
                positive = true;
        }
        return positive;
    }

    void refactor() {
        if (m_ == 0)
            return;
        Eigen::MatrixXd basis(m_, m_);
        for (Eigen::Index i = 0; i < m_; ++i)
            basis.col(i) = column(head_[idx(i)]);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis);
        binv_ = lu.inverse();
        // x_B = B^-1 (b - N x_N)
        Eigen::VectorXd rhs = b_;
        for (Eigen::Index j = 0; j < total_; ++j) {
            if (state_[idx(j)] == VarState::basic || value_[idx(j)] == 0.0)
                continue;
            rhs -= column(j) * value_[idx(j)];
        }
        const Eigen::VectorXd xb = binv_ * rhs;
        for (Eigen::Index i = 0; i < m_; ++i)
            value_[idx(head_[idx(i)])] = xb(i);
    }

    Eigen::VectorXd duals(const std::vector<double>& c) const {
        Eigen::VectorXd cb(m_);
        for (Eigen::Index i = 0; i < m_; ++i)
            cb(i) = c[idx(head_[idx(i)])];
        return binv_.transpose() * cb;
    }

    void iterate(const std::vector<double>& c) {
        double cmax = 1.0;
        for (double v : c)
            cmax = std::max(cmax, std::abs(v));
        const double dtol = opt_.optimality_tol * cmax;
        int degenerate_streak = 0;
        bool bland = false;
        int since_refactor = 0;

        while (true) {
            if (iterations_ >= opt_.max_iterations)
                throw NumericalError("simplex iteration limit (" + std::to_string(opt_.max_iterations) +
                                     ") exceeded");
            if (since_refactor >= opt_.refactor_interval) {
                refactor();
                since_refactor = 0;
            }

            const Eigen::VectorXd y = duals(c);

            Eigen::Index enter = -1;
            double enter_d = 0.0;
            double best = 0.0;
            for (Eigen::Index j = 0; j < total_; ++j) {
                const VarState st = state_[idx(j)];
                if (st == VarState::basic || lo_[idx(j)] == up_[idx(j)])
                    continue;
                const double d = reduced_cost(c, y, j);
                const bool eligible = (st == VarState::at_lower && d < -dtol) ||
                                      (st == VarState::at_upper && d > dtol) ||
                                      (st == VarState::at_zero && std::abs(d) > dtol);
                if (!eligible)
                    continue;
                if (bland) {
                    enter = j;
                    enter_d = d;
                    break;
                }
                if (std::abs(d) > best) {
                    best = std::abs(d);
                    enter = j;
                    enter_d = d;
                }
            }
            if (enter < 0)
                return;

            const double dir = enter_d < 0.0 ? 1.0 : -1.0;
            const Eigen::VectorXd alpha = binv_ * column(enter);

            // Harris two-pass ratio test.
            const double ftol = opt_.harris_tol;
            double relaxed = kInf;
            for (Eigen::Index i = 0; i < m_; ++i) {
                const double rate = -dir * alpha(i);
                if (std::abs(alpha(i)) <= opt_.pivot_tol)
                    continue;
                const std::size_t v = idx(head_[idx(i)]);
                if (rate < 0.0 && !std::isinf(lo_[v]))
                    relaxed = std::min(relaxed, (value_[v] - lo_[v] + ftol) / -rate);
                else if (rate > 0.0 && !std::isinf(up_[v]))
                    relaxed = std::min(relaxed, (up_[v] - value_[v] + ftol) / rate);
            }
            Eigen::Index leave = -1;
            double step = kInf;
            double pivot_mag = 0.0;
            for (Eigen::Index i = 0; i < m_; ++i) {
                const double rate = -dir * alpha(i);
                if (std::abs(alpha(i)) <= opt_.pivot_tol)
                    continue;
                const std::size_t v = idx(head_[idx(i)]);
                double t = kInf;
                if (rate < 0.0 && !std::isinf(lo_[v]))
                    t = (value_[v] - lo_[v]) / -rate;
                else if (rate > 0.0 && !std::isinf(up_[v]))
                    t = (up_[v] - value_[v]) / rate;
                if (std::isinf(t) || t > relaxed)
                    continue;
                t = std::max(t, 0.0);
                const bool better = bland ? (leave < 0 || head_[idx(i)] < head_[idx(leave)])
                                          : std::abs(alpha(i)) > pivot_mag;
                if (better) {
                    leave = i;
                    step = t;
                    pivot_mag = std::abs(alpha(i));
                }
            }

            const std::size_t q = idx(enter);
            const double flip = up_[q] - lo_[q];
            if (std::isinf(step) && std::isinf(flip))
                throw NumericalError("LP is unbounded");

            const bool bound_flip = flip <= step;
            const double t = bound_flip ? flip : step;

            for (Eigen::Index i = 0; i < m_; ++i)
                value_[idx(head_[idx(i)])] += -dir * alpha(i) * t;
            value_[q] += dir * t;

            if (bound_flip) {
                state_[q] = dir > 0.0 ? VarState::at_upper : VarState::at_lower;
                value_[q] = dir > 0.0 ? up_[q] : lo_[q];
            } else {
                const std::size_t out = idx(head_[idx(leave)]);
                const double rate = -dir * alpha(leave);
                if (rate < 0.0) {
                    state_[out] = VarState::at_lower;
                    value_[out] = lo_[out];
                } else {
                    state_[out] = VarState::at_upper;
                    value_[out] = up_[out];
                }
                state_[q] = VarState::basic;
                head_[idx(leave)] = enter;

                const double piv = alpha(leave);
                binv_.row(leave) /= piv;
                for (Eigen::Index i = 0; i < m_; ++i) {
                    if (i == leave || alpha(i) == 0.0)
                        continue;
                    binv_.row(i) -= alpha(i) * binv_.row(leave);
                }
                ++since_refactor;
            }

            ++iterations_;
            if (t <= 1e-12) {
                if (++degenerate_streak >= opt_.degenerate_streak_for_bland)
                    bland = true;
            } else {
                degenerate_streak = 0;
                bland = false;
            }
        }
    }

    const LpProblem& lp_;
    SimplexOptions opt_;
    Eigen::Index n_ = 0, me_ = 0, mi_ = 0, m_ = 0, total_ = 0;
    Eigen::MatrixXd a_;
    Eigen::VectorXd b_;
    std::vector<double> lo_, up_, value_, art_sign_;
    std::vector<VarState> state_;
    std::vector<Eigen::Index> head_;
    Eigen::MatrixXd binv_;
    int iterations_ = 0;
};

} // namespace

LpSolution solve_lp(const LpProblem& lp, const SimplexOptions& options) {
    lp.check();
    return BoundedSimplex(lp, options).run();
}

namespace {

// Sign-constrained multiplier attached to a bound pair: positive part belongs
// to the lower bound, negative part to the upper bound.
struct BoundAudit {
    double sign_violation = 0.0;
    double slackness = 0.0;
};

BoundAudit audit_multiplier(double mult, double value, double lo, double up) {
    BoundAudit a;
    if (mult > 0.0) {
        if (std::isinf(lo))
            a.sign_violation = mult;
        else
            a.slackness = mult * std::abs(value - lo);
    } else if (mult < 0.0) {
        if (std::isinf(up))
            a.sign_violation = -mult;
        else
            a.slackness = -mult * std::abs(up - value);
    }
    return a;
}

} // namespace

KktReport check_kkt(const LpProblem& lp, const std::vector<double>& x, const LpDuals& duals) {
    lp.check();
    const std::size_t n = lp.n_vars();
    const auto me = lp.eq_rows.rows();
    const auto mi = lp.ineq_rows.rows();
    if (x.size() != n || duals.reduced.size() != n || duals.eq.size() != static_cast<std::size_t>(me) ||
        duals.ineq.size() != static_cast<std::size_t>(mi))
        throw ConfigError("check_kkt: dimension mismatch between LP, point and multipliers");

    KktReport rep;
    double worst = -1.0;
    auto note = [&](double& slot, double v, const std::string& what) {
        slot = std::max(slot, v);
        if (v > worst) {
            worst = v;
            std::ostringstream os;
            os << what << " (" << v << ")";
            rep.worst = os.str();
        }
    };

    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) {
        note(rep.primal, std::max(0.0, lp.lower[j] - x[j]), "x" + std::to_string(j) + " below lower bound");
        note(rep.primal, std::max(0.0, x[j] - lp.upper[j]), "x" + std::to_string(j) + " above upper bound");
    }
    Eigen::VectorXd eq_act = me > 0 ? Eigen::VectorXd(lp.eq_rows * xv) : Eigen::VectorXd();
    for (Eigen::Index i = 0; i < me; ++i)
        note(rep.primal, std::abs(eq_act(i) - lp.eq_rhs[static_cast<std::size_t>(i)]),
             "equality row " + std::to_string(i) + " residual");
    Eigen::VectorXd in_act = mi > 0 ? Eigen::VectorXd(lp.ineq_rows * xv) : Eigen::VectorXd();
    for (Eigen::Index r = 0; r < mi; ++r) {
        const auto rr = static_cast<std::size_t>(r);
        note(rep.primal, std::max(0.0, lp.ineq_lower[rr] - in_act(r)), "row " + std::to_string(r) + " below band");
        note(rep.primal, std::max(0.0, in_act(r) - lp.ineq_upper[rr]), "row " + std::to_string(r) + " above band");
    }

    // Stationarity.
    Eigen::VectorXd grad = Eigen::Map<const Eigen::VectorXd>(lp.cost.data(), static_cast<Eigen::Index>(n));
    if (me > 0)
        grad -= lp.eq_rows.transpose() *
                Eigen::Map<const Eigen::VectorXd>(duals.eq.data(), me);
    if (mi > 0)
        grad -= lp.ineq_rows.transpose() *
                Eigen::Map<const Eigen::VectorXd>(duals.ineq.data(), mi);
    for (std::size_t j = 0; j < n; ++j)
        note(rep.dual, std::abs(grad(static_cast<Eigen::Index>(j)) - duals.reduced[j]),
             "stationarity residual on x" + std::to_string(j));

    for (std::size_t j = 0; j < n; ++j) {
        const BoundAudit a = audit_multiplier(duals.reduced[j], x[j], lp.lower[j], lp.upper[j]);
        note(rep.dual, a.sign_violation, "reduced cost sign on x" + std::to_string(j));
        note(rep.complementarity, a.slackness, "complementary slackness on x" + std::to_string(j));
    }
    for (Eigen::Index r = 0; r < mi; ++r) {
        const auto rr = static_cast<std::size_t>(r);
        const BoundAudit a = audit_multiplier(duals.ineq[rr], in_act(r), lp.ineq_lower[rr], lp.ineq_upper[rr]);
        note(rep.dual, a.sign_violation, "row multiplier sign on row " + std::to_string(r));
        note(rep.complementarity, a.slackness, "complementary slackness on row " + std::to_string(r));
    }
    return rep;
}

} // namespace cascade_rl
