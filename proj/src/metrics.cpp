#include "redmotion/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace redmotion {

using nlohmann::json;

namespace {

void check_horizon(const MotionPrediction& pred, const FutureTruth& truth, std::size_t horizon)
{
    if (horizon == 0) throw std::invalid_argument("metrics: horizon must be at least one step");
    if (horizon > pred.steps || horizon > truth.steps()) {
        throw std::invalid_argument("metrics: horizon " + std::to_string(horizon) + " exceeds prediction length " +
                                    std::to_string(std::min(pred.steps, truth.steps())));
    }
}

std::optional<double> mean_of(const std::vector<std::optional<double>>& values)
{
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& v : values) {
        if (!v) continue;
        total += *v;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return total / static_cast<double>(n);
}

ClassSummary summarize(const std::vector<const AgentMetrics*>& members, std::size_t horizon_count)
{
    ClassSummary s;
    s.count = members.size();
    for (std::size_t h = 0; h < horizon_count; ++h) {
        std::vector<std::optional<double>> ade;
        std::vector<std::optional<double>> fde;
        for (const auto* m : members) {
            ade.push_back(m->min_ade.at(h));
            fde.push_back(m->min_fde.at(h));
        }
        s.min_ade.push_back(mean_of(ade));
        s.min_fde.push_back(mean_of(fde));
    }
    s.avg_min_ade = mean_of(s.min_ade);
    s.avg_min_fde = mean_of(s.min_fde);
    return s;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j)
{
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

json summary_json(const ClassSummary& s)
{
    json ade = json::array();
    json fde = json::array();
    for (const auto& v : s.min_ade) ade.push_back(optional_json(v));
    for (const auto& v : s.min_fde) fde.push_back(optional_json(v));
    return {{"count", s.count}, {"min_ade", ade}, {"min_fde", fde}, {"avg_min_ade", optional_json(s.avg_min_ade)},
            {"avg_min_fde", optional_json(s.avg_min_fde)}};
}

ClassSummary summary_from(const json& j)
{
    ClassSummary s;
    s.count = j.at("count").get<std::size_t>();
    for (const auto& v : j.at("min_ade")) s.min_ade.push_back(optional_from(v));
    for (const auto& v : j.at("min_fde")) s.min_fde.push_back(optional_from(v));
    s.avg_min_ade = optional_from(j.at("avg_min_ade"));
    s.avg_min_fde = optional_from(j.at("avg_min_fde"));
    return s;
}

}  // namespace

std::optional<double> min_ade(const MotionPrediction& pred, const FutureTruth& truth, std::size_t horizon)
{
    check_horizon(pred, truth, horizon);
    std::size_t valid = 0;
    for (std::size_t t = 0; t < horizon; ++t) valid += truth.valid[t] ? 1 : 0;
    if (valid == 0) return std::nullopt;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < pred.modes(); ++k) {
        double total = 0.0;
        for (std::size_t t = 0; t < horizon; ++t) {
            if (truth.valid[t]) total += distance(pred.at(k, t), truth.positions[t]);
        }
        best = std::min(best, total / static_cast<double>(valid));
    }
    return best;
}

std::optional<double> min_fde(const MotionPrediction& pred, const FutureTruth& truth, std::size_t horizon)
{
    check_horizon(pred, truth, horizon);
    const std::size_t t = horizon - 1;
    if (!truth.valid[t]) return std::nullopt;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < pred.modes(); ++k) best = std::min(best, distance(pred.at(k, t), truth.positions[t]));
    return best;
}

AveragedMetrics averaged_metrics(const MotionPrediction& pred, const FutureTruth& truth, std::span<const std::size_t> horizons)
{
    if (horizons.empty()) throw std::invalid_argument("averaged_metrics: empty horizon set");
    std::vector<std::optional<double>> ade;
    std::vector<std::optional<double>> fde;
    AveragedMetrics out;
    for (auto h : horizons) {
        ade.push_back(min_ade(pred, truth, h));
        fde.push_back(min_fde(pred, truth, h));
        if (!ade.back() || !fde.back()) ++out.skipped;
    }
    out.min_ade = mean_of(ade);
    out.min_fde = mean_of(fde);
    return out;
}

double delta_rel(double value_pre, double value_base)
{
    if (!(value_base > 0.0)) throw std::invalid_argument("delta_rel: baseline value must be positive");
    return (value_pre - value_base) / value_base * 100.0;
}

AgentMetrics evaluate_agent(const std::string& scene_id, std::int64_t agent_id, AgentKind kind, const MotionPrediction& pred,
                            const FutureTruth& truth, std::span<const std::size_t> horizons)
{
    AgentMetrics m{scene_id, agent_id, kind, {}, {}};
    for (auto h : horizons) {
        m.min_ade.push_back(min_ade(pred, truth, h));
        m.min_fde.push_back(min_fde(pred, truth, h));
    }
    return m;
}

MetricReport aggregate_by_class(std::span<const AgentMetrics> agents, std::span<const AgentKind> classes,
                                std::span<const std::size_t> horizons)
{
    MetricReport report;
    report.horizons.assign(horizons.begin(), horizons.end());
    std::vector<const AgentMetrics*> all;
    for (const auto& a : agents) {
        if (a.min_ade.size() != horizons.size() || a.min_fde.size() != horizons.size()) {
            throw std::invalid_argument("aggregate_by_class: agent record does not match the horizon set");
        }
        all.push_back(&a);
    }
    report.overall = summarize(all, horizons.size());
    for (auto kind : classes) {
        std::vector<const AgentMetrics*> members;
        for (const auto* a : all) {
            if (a->kind == kind) members.push_back(a);
        }
        if (!members.empty()) report.classes[kind] = summarize(members, horizons.size());
    }
    return report;
}

void compare_to_baseline(MetricReport& report, const MetricReport& baseline, const std::string& baseline_name)
{
    report.baseline_name = baseline_name;
    if (report.overall.avg_min_ade && baseline.overall.avg_min_ade) {
        report.delta_min_ade_rel = delta_rel(*report.overall.avg_min_ade, *baseline.overall.avg_min_ade);
    }
    if (report.overall.avg_min_fde && baseline.overall.avg_min_fde) {
        report.delta_min_fde_rel = delta_rel(*report.overall.avg_min_fde, *baseline.overall.avg_min_fde);
    }
}

void write_agent_csv(std::span<const AgentMetrics> agents, std::span<const std::size_t> horizons, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write metrics file '" + path.string() + "'");
    out.precision(17);
    out << "scene_id,agent_id,class";
    for (auto h : horizons) out << ",min_ade_" << h << ",min_fde_" << h;
    out << '\n';
    for (const auto& a : agents) {
        out << a.scene_id << ',' << a.agent_id << ',' << to_string(a.kind);
        for (std::size_t i = 0; i < horizons.size(); ++i) {
            out << ',';
            if (a.min_ade[i]) out << *a.min_ade[i];
            out << ',';
            if (a.min_fde[i]) out << *a.min_fde[i];
        }
        out << '\n';
    }
}

std::string report_to_json(const MetricReport& report)
{
    json j;
    j["horizons"] = report.horizons;
    j["overall"] = summary_json(report.overall);
    json classes = json::object();
    for (const auto& [kind, summary] : report.classes) classes[std::string(to_string(kind))] = summary_json(summary);
    j["classes"] = classes;
    if (report.baseline_name) {
        j["baseline"] = *report.baseline_name;
        j["delta_min_ade_rel"] = optional_json(report.delta_min_ade_rel);
        j["delta_min_fde_rel"] = optional_json(report.delta_min_fde_rel);
    }
    if (report.t_rel) j["t_rel"] = *report.t_rel;
    return j.dump(2);
}

MetricReport report_from_json(const std::string& text)
{
    const json j = json::parse(text);
    MetricReport r;
    r.horizons = j.at("horizons").get<std::vector<std::size_t>>();
    r.overall = summary_from(j.at("overall"));
    for (const auto& [name, value] : j.at("classes").items()) r.classes[parse_agent_kind(name)] = summary_from(value);
    if (auto it = j.find("baseline"); it != j.end()) {
        r.baseline_name = it->get<std::string>();
        r.delta_min_ade_rel = optional_from(j.at("delta_min_ade_rel"));
        r.delta_min_fde_rel = optional_from(j.at("delta_min_fde_rel"));
    }
    if (auto it = j.find("t_rel"); it != j.end()) r.t_rel = it->get<double>();
    return r;
}

void write_report(const MetricReport& report, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write report '" + path.string() + "'");
    out << report_to_json(report) << '\n';
}

MetricReport read_report(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read report '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return report_from_json(buffer.str());
}

}  // namespace redmotion
