// Sectioned-CSV case format:
//
//   [meta]   base_mva
//   [bus]    id,kind,v_set,v_init,theta_init
//   [branch] from,to,r,x,b,rate,in_service
//   [gen]    bus,p_min,p_max,q_min,q_max,cost,in_service
//   [load]   bus,p_demand,q_demand,shed_cost,in_service
//
// All quantities are per-unit on base_mva; angles in radians. '#' starts a
// comment. A blank shed_cost defaults to 100 x the largest generator cost.

#include "cascade_rl/error.hpp"
#include "cascade_rl/network.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>

namespace cascade_rl {

namespace {

constexpr double kDefaultShedMultiple = 100.0;

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

[[noreturn]] void syntax_error(std::size_t line, const std::string& what) {
    throw CaseError("line " + std::to_string(line) + ": " + what);
}

std::vector<std::string_view> split_fields(std::string_view row) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = row.find(',', start);
        out.push_back(trim(row.substr(start, comma == std::string_view::npos ? row.npos : comma - start)));
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return out;
}

double parse_double(std::string_view field, std::size_t line, std::string_view name) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size())
        syntax_error(line, "bad number for " + std::string(name) + ": '" + std::string(field) + "'");
    return value;
}

int parse_int(std::string_view field, std::size_t line, std::string_view name) {
    int value = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size())
        syntax_error(line, "bad integer for " + std::string(name) + ": '" + std::string(field) + "'");
    return value;
}

bool parse_flag(std::string_view field, std::size_t line) {
    if (field == "1")
        return true;
    if (field == "0")
        return false;
    syntax_error(line, "in_service must be 0 or 1, got '" + std::string(field) + "'");
}

BusKind parse_kind(std::string_view field, std::size_t line) {
    if (field == "slack")
        return BusKind::slack;
    if (field == "pv")
        return BusKind::pv;
    if (field == "pq")
        return BusKind::pq;
    syntax_error(line, "unknown bus kind '" + std::string(field) + "'");
}

enum class Section { none, meta, bus, branch, gen, load };

struct SectionSpec {
    std::string_view name;
    Section section;
    std::size_t fields;
};

constexpr std::array<SectionSpec, 5> kSections{{
    {"meta", Section::meta, 1},
    {"bus", Section::bus, 5},
    {"branch", Section::branch, 7},
    {"gen", Section::gen, 7},
    {"load", Section::load, 5},
}};

std::string format_double(double v) {
    std::array<char, 32> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

} // namespace

Network parse_case(std::string_view text) {
    Network net;
    std::vector<std::optional<double>> shed_costs;
    std::vector<bool> seen(kSections.size(), false);
    bool have_meta = false;
    Section current = Section::none;
    std::size_t current_fields = 0;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.npos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;

        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                syntax_error(line_no, "unterminated section header");
            const std::string_view name = trim(line.substr(1, line.size() - 2));
            const auto it = std::find_if(kSections.begin(), kSections.end(),
                                         [&](const SectionSpec& s) { return s.name == name; });
            if (it == kSections.end())
                syntax_error(line_no, "unknown section [" + std::string(name) + "]");
            const auto idx = static_cast<std::size_t>(it - kSections.begin());
            if (seen[idx])
                syntax_error(line_no, "repeated section [" + std::string(name) + "]");
            seen[idx] = true;
            current = it->section;
            current_fields = it->fields;
            continue;
        }

        if (current == Section::none)
            syntax_error(line_no, "data before any section header");
        const auto f = split_fields(line);
        if (f.size() != current_fields)
            syntax_error(line_no, "expected " + std::to_string(current_fields) + " fields, got " +
                                      std::to_string(f.size()));

        switch (current) {
        case Section::meta:
            if (have_meta)
                syntax_error(line_no, "[meta] holds a single row");
            net.base_mva = parse_double(f[0], line_no, "base_mva");
            have_meta = true;
            break;
        case Section::bus:
            net.buses.push_back(Bus{parse_int(f[0], line_no, "id"), parse_kind(f[1], line_no),
                                    parse_double(f[2], line_no, "v_set"), parse_double(f[3], line_no, "v_init"),
                                    parse_double(f[4], line_no, "theta_init")});
            break;
        case Section::branch:
            net.branches.push_back(Branch{parse_int(f[0], line_no, "from"), parse_int(f[1], line_no, "to"),
                                          parse_double(f[2], line_no, "r"), parse_double(f[3], line_no, "x"),
                                          parse_double(f[4], line_no, "b"), parse_double(f[5], line_no, "rate"),
                                          parse_flag(f[6], line_no)});
            break;
        case Section::gen:
            net.generators.push_back(Generator{parse_int(f[0], line_no, "bus"), parse_double(f[1], line_no, "p_min"),
                                               parse_double(f[2], line_no, "p_max"),
                                               parse_double(f[3], line_no, "q_min"),
                                               parse_double(f[4], line_no, "q_max"),
                                               parse_double(f[5], line_no, "cost"), parse_flag(f[6], line_no)});
            break;
        case Section::load: {
            Load l;
            l.bus = parse_int(f[0], line_no, "bus");
            l.p_demand = parse_double(f[1], line_no, "p_demand");
            l.q_demand = parse_double(f[2], line_no, "q_demand");
            l.in_service = parse_flag(f[4], line_no);
            net.loads.push_back(l);
            shed_costs.push_back(f[3].empty() ? std::nullopt
                                              : std::optional<double>(parse_double(f[3], line_no, "shed_cost")));
            break;
        }
        case Section::none:
            break;
        }
    }

    if (!seen[1])
        throw CaseError("no bus section");
    if (!have_meta)
        throw CaseError("no [meta] section with base_mva");

    double max_cost = 0.0;
    for (const Generator& g : net.generators)
        max_cost = std::max(max_cost, g.cost);
    const double default_shed = max_cost > 0.0 ? kDefaultShedMultiple * max_cost : 1.0;
    for (std::size_t k = 0; k < net.loads.size(); ++k)
        net.loads[k].shed_cost = shed_costs[k].value_or(default_shed);

    validate_network(net);
    return net;
}

Network load_case_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw CaseError("cannot open case file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_case(buf.str());
}

std::string write_case(const Network& net) {
    std::string out;
    auto row = [&out](std::initializer_list<std::string> fields) {
        bool first = true;
        for (const auto& f : fields) {
            if (!first)
                out += ',';
            out += f;
            first = false;
        }
        out += '\n';
    };
    const auto d = format_double;
    const auto i = [](int v) { return std::to_string(v); };
    const auto flag = [](bool v) { return std::string(v ? "1" : "0"); };

    out += "[meta]\n# base_mva\n";
    row({d(net.base_mva)});
    out += "\n[bus]\n# id,kind,v_set,v_init,theta_init\n";
    for (const Bus& b : net.buses)
        row({i(b.id), std::string(to_string(b.kind)), d(b.v_set), d(b.v_init), d(b.theta_init)});
    out += "\n[branch]\n# from,to,r,x,b,rate,in_service\n";
    for (const Branch& br : net.branches)
        row({i(br.from_bus), i(br.to_bus), d(br.r), d(br.x), d(br.b_charge), d(br.rate), flag(br.in_service)});
    out += "\n[gen]\n# bus,p_min,p_max,q_min,q_max,cost,in_service\n";
    for (const Generator& g : net.generators)
        row({i(g.bus), d(g.p_min), d(g.p_max), d(g.q_min), d(g.q_max), d(g.cost), flag(g.in_service)});
    out += "\n[load]\n# bus,p_demand,q_demand,shed_cost,in_service\n";
    for (const Load& l : net.loads)
        row({i(l.bus), d(l.p_demand), d(l.q_demand), d(l.shed_cost), flag(l.in_service)});
    return out;
}

} // namespace cascade_rl
