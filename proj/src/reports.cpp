#include "cascade_rl/harness.hpp"

#include "cascade_rl/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>

namespace cascade_rl {

namespace {

// Shortest representation that round-trips.
std::string number(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

nlohmann::ordered_json metrics_json(const RunMetrics& m) {
    std::size_t wins = 0;
    for (const EpisodeRow& r : m.rows)
        wins += r.won ? 1 : 0;
    nlohmann::ordered_json j;
    j["episodes"] = m.rows.size();
    j["wins"] = wins;
    j["winning_rate"] = m.winning_rate;
    j["avg_reward"] = m.avg_reward;
    return j;
}

} // namespace

std::string episodes_csv(const RunMetrics& metrics) {
    std::string out = "episode,won,stages_completed,total_reward,epsilon,wall_ms\n";
    for (const EpisodeRow& r : metrics.rows) {
        out += std::to_string(r.episode);
        out += r.won ? ",1," : ",0,";
        out += std::to_string(r.stages_completed);
        out += ',';
        out += number(r.total_reward);
        out += ',';
        out += number(r.epsilon);
        out += ',';
        out += fixed(r.wall_ms, 3);
        out += '\n';
    }
    return out;
}

std::string summary_json(const RunMetrics& metrics, const RunConfig& config, const RunMetrics* baseline) {
    nlohmann::ordered_json j = metrics_json(metrics);
    j["agent_kind"] = std::string(to_string(config.agent_kind));
    j["seed"] = config.seed;
    j["stages"] = config.stages;
    j["ma_window"] = config.ma_window;
    const std::size_t tail = std::min(config.ma_window, metrics.rows.size());
    j["tail_episodes"] = tail;
    j["tail_winning_rate"] = metrics.tail_winning_rate(tail);
    j["tail_avg_reward"] = metrics.tail_avg_reward(tail);
    if (baseline)
        j["random_baseline"] = metrics_json(*baseline);
    return j.dump(2) + "\n";
}

std::string reward_svg(const RunMetrics& metrics, std::size_t window) {
    if (metrics.rows.empty())
        throw ConfigError("no episodes to plot");
    std::vector<double> rewards;
    rewards.reserve(metrics.rows.size());
    for (const EpisodeRow& r : metrics.rows)
        rewards.push_back(r.total_reward);
    const std::vector<double> ma = moving_average(rewards, window);

    constexpr double width = 800.0, height = 400.0, margin = 40.0;
    double lo = *std::min_element(ma.begin(), ma.end());
    double hi = *std::max_element(ma.begin(), ma.end());
    if (hi - lo < 1e-9) {
        lo -= 1.0;
        hi += 1.0;
    }
    const double n = static_cast<double>(std::max<std::size_t>(ma.size() - 1, 1));

    std::string points;
    for (std::size_t i = 0; i < ma.size(); ++i) {
        const double x = margin + (width - 2 * margin) * static_cast<double>(i) / n;
        const double y = height - margin - (height - 2 * margin) * (ma[i] - lo) / (hi - lo);
        if (i)
            points += ' ';
        points += fixed(x, 2) + "," + fixed(y, 2);
    }

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"400\" viewBox=\"0 0 800 400\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"400\" fill=\"white\"/>\n";
    svg += "<line x1=\"40\" y1=\"360\" x2=\"760\" y2=\"360\" stroke=\"black\"/>\n";
    svg += "<line x1=\"40\" y1=\"40\" x2=\"40\" y2=\"360\" stroke=\"black\"/>\n";
    svg += "<text x=\"44\" y=\"34\" font-size=\"12\">moving-average reward (window " + std::to_string(window) +
           "), range [" + fixed(lo, 1) + ", " + fixed(hi, 1) + "]</text>\n";
    svg += "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
    svg += "</svg>\n";
    return svg;
}

} // namespace cascade_rl
