#pragma once

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mslik/errors.hpp"
#include "mslik/estimators.hpp"
#include "mslik/models.hpp"
#include "mslik/multiscale.hpp"
#include "mslik/partition.hpp"
#include "mslik/risk.hpp"

namespace mslik {

using nlohmann::json;

// --- partition trees: nested objects, leaves lack "split" ---

inline json tree_to_json(const PartitionTree& tree) {
    const auto emit = [&](auto&& self, int id) -> json {
        const TreeNode& nd = tree.node(id);
        json j;
        j["start"] = nd.cell.start;
        j["end"] = nd.cell.end;
        if (!nd.leaf()) {
            j["split"] = nd.split;
            j["left"] = self(self, nd.left);
            j["right"] = self(self, nd.right);
        }
        return j;
    };
    return emit(emit, 0);
}

inline PartitionTree tree_from_json(const json& j) {
    detail::TreeBuilder b;
    const auto parse = [&](auto&& self, const json& node) -> int {
        const Interval iv{node.at("start").get<int>(), node.at("end").get<int>()};
        const int id = b.add_leaf(iv);
        if (node.contains("split")) {
            const int l = self(self, node.at("left"));
            const int r = self(self, node.at("right"));
            b.split_leaf(id, node.at("split").get<int>(), l, r);
        }
        return id;
    };
    parse(parse, j);
    return b.finish();
}

// --- multiscale parameters ---

inline json multiscale_to_json(const MultiscaleParams& ms) {
    json j;
    j["root"] = ms.root;
    j["entries"] = json::array();
    for (const auto& e : ms.entries) {
        j["entries"].push_back(
            {{"start", e.parent.start}, {"end", e.parent.end}, {"split", e.split}, {"omega", e.omega}});
    }
    return j;
}

inline MultiscaleParams multiscale_from_json(const json& j) {
    MultiscaleParams ms;
    ms.root = j.at("root").get<double>();
    for (const auto& e : j.at("entries")) {
        ms.entries.push_back({{e.at("start").get<int>(), e.at("end").get<int>()},
                              e.at("split").get<int>(),
                              e.at("omega").get<double>()});
    }
    return ms;
}

// --- estimate results ---

inline json estimate_to_json(const EstimateResult& res) {
    json j;
    j["model"] = std::string(model_name(res.model));
    j["gamma"] = res.gamma;
    j["objective_nats"] = res.objective;
    j["kept"] = json::array();
    for (const auto& k : res.kept) {
        j["kept"].push_back(
            {{"start", k.parent.start}, {"end", k.parent.end}, {"split", k.split}, {"omega", k.omega}});
    }
    j["partition"] = json::array();
    for (const auto& c : res.partition) {
        j["partition"].push_back({{"start", c.cell.start}, {"end", c.cell.end}, {"value", c.value}});
    }
    j["theta_hat"] = res.theta_hat.values;
    return j;
}

// --- risk curves ---

inline std::string risk_curve_to_csv(const RiskCurve& curve) {
    std::ostringstream out;
    out << "n,risk,stderr,reps\n";
    out << std::setprecision(17);
    for (const auto& p : curve.points) {
        out << p.n_leaves << ',' << p.risk << ',' << p.stderr_ << ',' << p.reps << '\n';
    }
    return out.str();
}

inline json risk_summary_to_json(const RiskCurve& curve) {
    json j;
    j["slope"] = curve.slope;
    j["slope_se"] = curve.slope_se;
    j["points"] = json::array();
    for (const auto& p : curve.points) {
        j["points"].push_back(
            {{"n", p.n_leaves}, {"risk", p.risk}, {"stderr", p.stderr_}, {"reps", p.reps}});
    }
    return j;
}

// --- single-column CSV with a "value" header ---

inline void write_value_csv(std::ostream& out, std::span<const double> values) {
    out << "value\n" << std::setprecision(17);
    for (double v : values) out << v << '\n';
}

inline std::vector<double> read_value_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw invalid_data("empty CSV input");
    // Tolerate a UTF-8 BOM and surrounding whitespace on the header.
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line != "value") throw invalid_data("expected CSV header 'value', got '" + line + "'");
    std::vector<double> values;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty()) continue;
        try {
            std::size_t used = 0;
            const double v = std::stod(line, &used);
            if (used != line.size()) throw std::invalid_argument(line);
            values.push_back(v);
        } catch (const std::exception&) {
            throw invalid_data("bad number at CSV line " + std::to_string(line_no) + ": '" + line + "'");
        }
    }
    if (values.empty()) throw invalid_data("CSV contains no values");
    return values;
}

inline std::vector<double> read_value_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw invalid_data("cannot open " + path);
    return read_value_csv(in);
}

inline void write_value_csv_file(const std::string& path, std::span<const double> values) {
    std::ofstream out(path);
    if (!out) throw invalid_data("cannot write " + path);
    write_value_csv(out, values);
}

}  // namespace mslik
