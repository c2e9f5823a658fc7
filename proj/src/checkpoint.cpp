#include "cascade_rl/agent.hpp"

#include "cascade_rl/error.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace cascade_rl {

namespace {

constexpr const char* kFormat = "cascade-rl-valuenet";
constexpr int kVersion = 1;

} // namespace

std::string checkpoint_to_string(const ValueNet& net) {
    nlohmann::ordered_json j;
    j["format"] = kFormat;
    j["version"] = kVersion;
    j["kind"] = std::string(to_string(net.kind()));
    j["input_dim"] = net.input_dim();
    j["padded_side"] = net.padded_side();
    j["n_actions"] = net.n_actions();
    if (net.kind() != NetKind::linear)
        j["alphas"] = std::vector<double>(ActionSet::alphas().begin(), ActionSet::alphas().end());
    nlohmann::ordered_json layers = nlohmann::ordered_json::array();
    const auto params = net.params();
    for (const ParamBlock& b : net.blocks()) {
        nlohmann::ordered_json layer;
        layer["name"] = b.name;
        layer["shape"] = b.shape;
        layer["values"] = std::vector<double>(params.begin() + static_cast<std::ptrdiff_t>(b.offset),
                                              params.begin() + static_cast<std::ptrdiff_t>(b.offset + b.size()));
        layers.push_back(std::move(layer));
    }
    j["layers"] = std::move(layers);
    return j.dump() + "\n";
}

ValueNet checkpoint_from_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("checkpoint is not valid JSON: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != kFormat)
            throw IoError("not a value-network checkpoint");
        if (j.at("version").get<int>() != kVersion)
            throw IoError("unsupported checkpoint version");
        const NetKind kind = net_kind_from_string(j.at("kind").get<std::string>());
        ValueNet net = ValueNet::skeleton(kind, j.at("input_dim").get<std::size_t>(),
                                          j.at("n_actions").get<std::size_t>());
        if (j.at("padded_side").get<std::size_t>() != net.padded_side())
            throw IoError("checkpoint padded_side does not match its input_dim");
        if (j.contains("alphas")) {
            const auto alphas = j.at("alphas").get<std::vector<double>>();
            if (!std::equal(alphas.begin(), alphas.end(), ActionSet::alphas().begin(), ActionSet::alphas().end()))
                throw IoError("checkpoint action set differs from this build");
        }
        const auto& layers = j.at("layers");
        if (layers.size() != net.blocks().size())
            throw IoError("checkpoint layer count mismatch");
        auto params = net.params();
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const ParamBlock& b = net.blocks()[i];
            if (layers[i].at("name").get<std::string>() != b.name ||
                layers[i].at("shape").get<std::vector<std::size_t>>() != b.shape)
                throw IoError("checkpoint layer '" + b.name + "' has the wrong name or shape");
            const auto values = layers[i].at("values").get<std::vector<double>>();
            if (values.size() != b.size())
                throw IoError("checkpoint layer '" + b.name + "' has the wrong number of values");
            std::copy(values.begin(), values.end(), params.begin() + static_cast<std::ptrdiff_t>(b.offset));
        }
        return net;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed checkpoint: ") + e.what());
    } catch (const ConfigError& e) {
        throw IoError(std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const ValueNet& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open '" + path + "' for writing");
    out << checkpoint_to_string(net);
    if (!out)
        throw IoError("failed writing '" + path + "'");
}

ValueNet load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open checkpoint '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return checkpoint_from_string(ss.str());
}

} // namespace cascade_rl
