#include "cascade_rl/cascade_rl.h"

#include "cascade_rl/agent.hpp"
#include "cascade_rl/cascade.hpp"
#include "cascade_rl/error.hpp"
#include "cascade_rl/harness.hpp"
#include "cascade_rl/network.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

namespace {

using namespace cascade_rl;

thread_local std::string g_last_error;

class FfiError : public std::runtime_error {
public:
    FfiError(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
    int code() const noexcept { return code_; }

private:
    int code_;
};

template <typename T, std::uint32_t MAGIC>
struct crl_struct {
    explicit crl_struct(std::unique_ptr<T> obj) : magic(MAGIC), obj(std::move(obj)) {}
    ~crl_struct() { magic = 0; }

    T& get() {
        if (magic != MAGIC)
            throw FfiError(CRL_ERROR_INVALID_OBJECT, "bad magic in handle");
        return *obj;
    }

    std::uint32_t magic;
    std::unique_ptr<T> obj;
};

template <typename F>
int guarded(F&& fn) {
    g_last_error.clear();
    try {
        return fn();
    } catch (const FfiError& e) {
        g_last_error = e.what();
        return e.code();
    } catch (const CaseError& e) {
        g_last_error = e.what();
        return CRL_ERROR_CASE;
    } catch (const ConfigError& e) {
        g_last_error = e.what();
        return CRL_ERROR_CONFIG;
    } catch (const NumericalError& e) {
        g_last_error = e.what();
        return CRL_ERROR_NUMERICAL;
    } catch (const IoError& e) {
        g_last_error = e.what();
        return CRL_ERROR_IO;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return CRL_ERROR_UNKNOWN;
    } catch (...) {
        g_last_error = "unknown exception";
        return CRL_ERROR_UNKNOWN;
    }
}

template <typename P>
void require(P* p, const char* name) {
    if (!p)
        throw FfiError(CRL_ERROR_INVALID_ARGUMENT, std::string("argument ") + name + " is null");
}

template <typename T, std::uint32_t M>
T& safe_get(crl_struct<T, M>* p) {
    if (!p)
        throw FfiError(CRL_ERROR_INVALID_ARGUMENT, "null handle");
    return p->get();
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out)
        throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

std::size_t alpha_index(double alpha) {
    for (std::size_t i = 0; i < ActionSet::size(); ++i)
        if (std::abs(ActionSet::alphas()[i] - alpha) < 1e-12)
            return i;
    throw ConfigError("alpha " + std::to_string(alpha) + " is not in the action set");
}

} // namespace

struct crl_network_struct : crl_struct<Network, 0x4E455457> {
    using crl_struct::crl_struct;
};

struct crl_valuenet_struct : crl_struct<ValueNet, 0x564E4554> {
    using crl_struct::crl_struct;
};

extern "C" {

const char* crl_version(void) { return "0.1.0"; }

const char* crl_error_description(int code) {
    switch (code) {
    case CRL_OK:
        return "OK";
    case CRL_ERROR_INVALID_ARGUMENT:
        return "Invalid argument";
    case CRL_ERROR_CONFIG:
        return "Configuration error";
    case CRL_ERROR_CASE:
        return "Case data error";
    case CRL_ERROR_NUMERICAL:
        return "Numerical failure";
    case CRL_ERROR_IO:
        return "I/O error";
    case CRL_ERROR_INVALID_OBJECT:
        return "Invalid object handle";
    default:
        return "Unknown error";
    }
}

const char* crl_last_error(void) { return g_last_error.c_str(); }

void crl_string_free(char* str) { std::free(str); }

int crl_network_load(crl_network_t* net, const char* path) {
    return guarded([&] {
        require(net, "net");
        require(path, "path");
        *net = nullptr;
        *net = new crl_network_struct(std::make_unique<Network>(load_case_file(path)));
        return CRL_OK;
    });
}

int crl_network_parse(crl_network_t* net, const char* text) {
    return guarded([&] {
        require(net, "net");
        require(text, "text");
        *net = nullptr;
        *net = new crl_network_struct(std::make_unique<Network>(parse_case(text)));
        return CRL_OK;
    });
}

int crl_network_destroy(crl_network_t net) {
    return guarded([&] {
        if (!net)
            return CRL_OK;
        safe_get(net);
        delete net;
        return CRL_OK;
    });
}

int crl_network_write(crl_network_t net, char** text) {
    return guarded([&] {
        require(text, "text");
        *text = dup_string(write_case(safe_get(net)));
        return CRL_OK;
    });
}

int crl_network_counts(crl_network_t net, size_t* buses, size_t* branches, size_t* gens, size_t* loads) {
    return guarded([&] {
        const Network& n = safe_get(net);
        if (buses)
            *buses = n.n_bus();
        if (branches)
            *branches = n.n_branch();
        if (gens)
            *gens = n.n_gen();
        if (loads)
            *loads = n.n_load();
        return CRL_OK;
    });
}

int crl_network_state_dim(crl_network_t net, size_t* dim) {
    return guarded([&] {
        require(dim, "dim");
        *dim = state_dim(safe_get(net));
        return CRL_OK;
    });
}

int crl_dcopf_json(crl_network_t net, double alpha, char** json) {
    return guarded([&] {
        require(json, "json");
        if (!(alpha > 0.0) || !std::isfinite(alpha))
            throw ConfigError("alpha must be positive");
        Network n = safe_get(net);
        const double island_shed = deenergize_outside_slack_island(n);
        const DispatchResult d = island_dcopf(n, alpha);
        nlohmann::ordered_json j;
        j["alpha"] = alpha;
        j["feasible"] = d.feasible;
        j["objective"] = d.feasible ? nlohmann::ordered_json(d.objective) : nlohmann::ordered_json();
        j["shed_total"] = d.shed_total;
        j["island_shed"] = island_shed;
        j["p_gen"] = d.p_gen;
        j["p_load_served"] = d.p_load_served;
        *json = dup_string(j.dump() + "\n");
        return CRL_OK;
    });
}

int crl_pf_json(crl_network_t net, char** json, int* converged) {
    return guarded([&] {
        require(json, "json");
        Network n = safe_get(net);
        deenergize_outside_slack_island(n);
        const DispatchResult d = island_dcopf(n, 1.0);
        if (!d.feasible)
            throw CaseError("DCOPF at alpha = 1 is infeasible, no dispatch to run the power flow with");
        const PfSolution s = island_power_flow(n, d);
        double max_loading = 0.0;
        std::size_t over = 0;
        for (double l : s.loading) {
            max_loading = std::max(max_loading, l);
            over += l > 1.0 ? 1 : 0;
        }
        nlohmann::ordered_json j;
        j["converged"] = s.converged;
        j["iterations"] = s.iterations;
        j["max_mismatch"] = s.max_mismatch;
        j["max_loading"] = max_loading;
        j["overlimit_lines"] = over;
        j["v"] = s.v;
        j["theta"] = s.theta;
        j["flow_from"] = s.flow_from;
        j["loading"] = s.loading;
        *json = dup_string(j.dump() + "\n");
        if (converged)
            *converged = s.converged ? 1 : 0;
        return CRL_OK;
    });
}

int crl_episode_json(crl_network_t net, double alpha, uint64_t seed, int attack_mode, char** summary, char** trace) {
    return guarded([&] {
        require(summary, "summary");
        if (attack_mode != CRL_ATTACK_UNIFORM && attack_mode != CRL_ATTACK_IMPORTANT)
            throw FfiError(CRL_ERROR_INVALID_ARGUMENT, "unknown attack mode");
        const std::size_t action = alpha_index(alpha);
        CascadeOptions options;
        options.attack_mode = attack_mode == CRL_ATTACK_IMPORTANT ? AttackMode::important : AttackMode::uniform;
        const Environment env(safe_get(net), options);
        EpisodeHooks hooks;
        hooks.policy = [action](const StateVector&, std::size_t) { return action; };
        Rng rng(seed, Stream::attack, 0);
        const EpisodeResult r = env.run_episode(hooks, rng);

        nlohmann::ordered_json j;
        j["seed"] = seed;
        j["alpha"] = alpha;
        j["won"] = r.won;
        j["total_reward"] = r.total_reward;
        nlohmann::ordered_json stages = nlohmann::ordered_json::array();
        for (const StageOutcome& s : r.stages) {
            nlohmann::ordered_json st;
            st["attacked"] = s.attacked ? nlohmann::ordered_json(*s.attacked) : nlohmann::ordered_json();
            st["generations"] = s.generations.size();
            st["terminal"] = s.terminal == Terminal::equilibrium ? "equilibrium" : "collapse";
            st["stage_cost"] = s.stage_cost;
            st["reward"] = s.reward;
            st["island_shed"] = s.island_shed;
            stages.push_back(std::move(st));
        }
        j["stages"] = std::move(stages);
        const std::string trace_text = trace ? episode_trace_jsonl(r) : std::string();
        *summary = dup_string(j.dump() + "\n");
        if (trace)
            *trace = dup_string(trace_text);
        return CRL_OK;
    });
}

int crl_valuenet_load(crl_valuenet_t* vn, const char* path) {
    return guarded([&] {
        require(vn, "vn");
        require(path, "path");
        *vn = nullptr;
        *vn = new crl_valuenet_struct(std::make_unique<ValueNet>(load_checkpoint(path)));
        return CRL_OK;
    });
}

int crl_valuenet_destroy(crl_valuenet_t vn) {
    return guarded([&] {
        if (!vn)
            return CRL_OK;
        safe_get(vn);
        delete vn;
        return CRL_OK;
    });
}

int crl_valuenet_info(crl_valuenet_t vn, char** json) {
    return guarded([&] {
        require(json, "json");
        const ValueNet& n = safe_get(vn);
        nlohmann::ordered_json j;
        j["kind"] = std::string(to_string(n.kind()));
        j["input_dim"] = n.input_dim();
        j["padded_side"] = n.padded_side();
        j["n_actions"] = n.n_actions();
        j["parameters"] = n.params().size();
        *json = dup_string(j.dump() + "\n");
        return CRL_OK;
    });
}

int crl_train(const char* config_path, char** summary) {
    return guarded([&] {
        require(config_path, "config_path");
        const RunConfig config = load_run_config(config_path);
        const TrainResult r = train(config);
        if (summary) {
            nlohmann::ordered_json j = nlohmann::ordered_json::parse(summary_json(r.metrics, config));
            j["output_dir"] = config.output_dir;
            j["checkpoint"] = r.checkpoint_path.empty() ? nlohmann::ordered_json() : nlohmann::ordered_json(r.checkpoint_path);
            *summary = dup_string(j.dump(2) + "\n");
        }
        return CRL_OK;
    });
}

int crl_evaluate(const char* config_path, const char* checkpoint_path, char** summary) {
    return guarded([&] {
        require(config_path, "config_path");
        const RunConfig config = load_run_config(config_path);
        std::optional<ValueNet> net;
        if (checkpoint_path)
            net = load_checkpoint(checkpoint_path);
        const EvalResult r = evaluate(config, net ? &*net : nullptr);
        if (summary) {
            nlohmann::ordered_json j = nlohmann::ordered_json::parse(summary_json(r.metrics, config, &r.baseline));
            j["output_dir"] = config.output_dir;
            *summary = dup_string(j.dump(2) + "\n");
        }
        return CRL_OK;
    });
}

} // extern "C"
