// cascade-rl: command-line front end over the C API.

#include "cascade_rl/cascade_rl.h"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <memory>
#include <string>

namespace {

enum Exit { kOk = 0, kConfig = 2, kCase = 3, kNumerical = 4 };

int exit_code(int rc) {
    switch (rc) {
    case CRL_OK:
        return kOk;
    case CRL_ERROR_CASE:
        return kCase;
    case CRL_ERROR_NUMERICAL:
        return kNumerical;
    default:
        return kConfig;
    }
}

int fail(int rc) {
    std::cerr << "cascade-rl: " << crl_error_description(rc) << ": " << crl_last_error() << "\n";
    return exit_code(rc);
}

struct StringDeleter {
    void operator()(char* s) const { crl_string_free(s); }
};
using OwnedString = std::unique_ptr<char, StringDeleter>;

struct NetworkDeleter {
    void operator()(crl_network_struct* n) const { crl_network_destroy(n); }
};
using OwnedNetwork = std::unique_ptr<crl_network_struct, NetworkDeleter>;

int load_network(const std::string& path, OwnedNetwork& out) {
    crl_network_t net = nullptr;
    const int rc = crl_network_load(&net, path.c_str());
    out.reset(net);
    return rc;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-stage cascading failure simulator with learned flow-limit control"};
    app.require_subcommand(1);

    std::string config_path, checkpoint_path, case_path;
    double alpha = 1.0;
    std::uint64_t seed = 1;
    bool trace = false;
    std::string attack = "uniform";

    auto* train = app.add_subcommand("train", "Train an agent from a JSON config");
    train->add_option("--config", config_path, "Run config (JSON)")->required();

    auto* eval = app.add_subcommand("eval", "Greedy evaluation of a checkpoint");
    eval->add_option("--config", config_path, "Run config (JSON)")->required();
    eval->add_option("--checkpoint", checkpoint_path, "Weights written by train");

    auto* episode = app.add_subcommand("episode", "Play one episode with a fixed alpha");
    episode->add_option("--case", case_path, "Case file")->required();
    episode->add_option("--alpha", alpha, "Flow-limit scaling (member of the action set)")->required();
    episode->add_option("--seed", seed, "Attack seed");
    episode->add_option("--attack", attack, "uniform or important")->check(CLI::IsMember({"uniform", "important"}));
    episode->add_flag("--trace", trace, "Print one JSON line per cascade generation");

    auto* dcopf = app.add_subcommand("dcopf", "Solve the DCOPF of a case");
    dcopf->add_option("--case", case_path, "Case file")->required();
    dcopf->add_option("--alpha", alpha, "Flow-limit scaling");

    auto* pf = app.add_subcommand("pf", "AC power flow under the alpha = 1 DCOPF dispatch");
    pf->add_option("--case", case_path, "Case file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    if (*train) {
        char* summary = nullptr;
        const int rc = crl_train(config_path.c_str(), &summary);
        OwnedString s(summary);
        if (rc != CRL_OK)
            return fail(rc);
        std::cout << s.get();
        return kOk;
    }

    if (*eval) {
        char* summary = nullptr;
        const int rc = crl_evaluate(config_path.c_str(), checkpoint_path.empty() ? nullptr : checkpoint_path.c_str(),
                                    &summary);
        OwnedString s(summary);
        if (rc != CRL_OK)
            return fail(rc);
        std::cout << s.get();
        return kOk;
    }

    OwnedNetwork net;
    if (const int rc = load_network(case_path, net); rc != CRL_OK)
        return fail(rc);

    if (*episode) {
        char* summary = nullptr;
        char* lines = nullptr;
        const int mode = attack == "important" ? CRL_ATTACK_IMPORTANT : CRL_ATTACK_UNIFORM;
        const int rc = crl_episode_json(net.get(), alpha, seed, mode, &summary, trace ? &lines : nullptr);
        OwnedString s(summary), l(lines);
        if (rc != CRL_OK)
            return fail(rc);
        if (trace)
            std::cout << l.get();
        std::cout << s.get();
        return kOk;
    }

    if (*dcopf) {
        char* out = nullptr;
        const int rc = crl_dcopf_json(net.get(), alpha, &out);
        OwnedString s(out);
        if (rc != CRL_OK)
            return fail(rc);
        std::cout << s.get();
        return kOk;
    }

    char* out = nullptr;
    int converged = 0;
    const int rc = crl_pf_json(net.get(), &out, &converged);
    OwnedString s(out);
    if (rc != CRL_OK)
        return fail(rc);
    std::cout << s.get();
    if (!converged) {
        std::cerr << "cascade-rl: power flow did not converge\n";
        return kNumerical;
    }
    return kOk;
}
