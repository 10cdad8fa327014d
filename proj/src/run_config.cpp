#include "redmotion/run_config.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "redmotion/nn/parameters.hpp"

namespace redmotion {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected)
{
    throw std::invalid_argument("run config: '" + key + "' = '" + value + "' is not " + expected);
}

double parse_double(const std::string& key, const std::string& value)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        bad_value(key, value, "a number");
    }
    if (used != value.size()) bad_value(key, value, "a number");
    return v;
}

std::uint64_t parse_uint(const std::string& key, const std::string& value)
{
    if (value.empty() || value.find_first_not_of("0123456789") != std::string::npos) bad_value(key, value, "a nonnegative integer");
    try {
        return std::stoull(value);
    } catch (const std::exception&) {
        bad_value(key, value, "a nonnegative integer");
    }
}

bool parse_bool(const std::string& key, const std::string& value)
{
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    bad_value(key, value, "a boolean");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& value)
{
    std::vector<std::size_t> out;
    std::stringstream in(value);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(parse_uint(key, trim(item)));
    if (out.empty()) bad_value(key, value, "a comma-separated list");
    return out;
}

std::string join(const std::vector<std::size_t>& values)
{
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + std::to_string(values[i]);
    return out;
}

std::string num(double v)
{
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

struct Field {
    const char* key;
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define RM_SIZE_FIELD(name, member)                                                                     \
    Field                                                                                               \
    {                                                                                                   \
        name, [](RunConfig& c, const std::string& k, const std::string& v) { c.member = parse_uint(k, v); }, \
            [](const RunConfig& c) { return std::to_string(c.member); }                                 \
    }
#define RM_DOUBLE_FIELD(name, member)                                                                       \
    Field                                                                                                   \
    {                                                                                                       \
        name, [](RunConfig& c, const std::string& k, const std::string& v) { c.member = parse_double(k, v); }, \
            [](const RunConfig& c) { return num(c.member); }                                                \
    }
#define RM_PATH_FIELD(name, member)                                                            \
    Field                                                                                      \
    {                                                                                          \
        name, [](RunConfig& c, const std::string&, const std::string& v) { c.member = v; },   \
            [](const RunConfig& c) { return c.member.string(); }                               \
    }

const std::vector<Field>& fields()
{
    static const std::vector<Field> table = {
        {"mode", [](RunConfig& c, const std::string&, const std::string& v) { c.mode = parse_run_mode(v); },
         [](const RunConfig& c) { return to_string(c.mode); }},
        {"model", [](RunConfig& c, const std::string&, const std::string& v) { c.model = parse_model_kind(v); },
         [](const RunConfig& c) { return to_string(c.model); }},
        RM_PATH_FIELD("train_data", train_data),
        RM_PATH_FIELD("holdout_data", holdout_data),
        RM_PATH_FIELD("out_dir", out_dir),
        RM_PATH_FIELD("init_checkpoint", init_checkpoint),
        RM_PATH_FIELD("baseline_report", baseline_report),
        RM_DOUBLE_FIELD("fds", fds),
        RM_SIZE_FIELD("batch_size", batch_size),
        RM_SIZE_FIELD("steps", steps),
        RM_DOUBLE_FIELD("lr_init", lr_init),
        RM_DOUBLE_FIELD("lr_final", lr_final),
        RM_DOUBLE_FIELD("beta1", optimizer.beta1),
        RM_DOUBLE_FIELD("beta2", optimizer.beta2),
        RM_DOUBLE_FIELD("adam_eps", optimizer.eps),
        RM_DOUBLE_FIELD("weight_decay", optimizer.weight_decay),
        RM_SIZE_FIELD("seed", seed),
        RM_DOUBLE_FIELD("bt_lambda", loss.bt_lambda),
        RM_DOUBLE_FIELD("aux_beta", loss.aux_beta),
        RM_DOUBLE_FIELD("nce_temperature", loss.nce_temperature),
        RM_SIZE_FIELD("model_dim", model_config.model_dim),
        RM_SIZE_FIELD("heads", model_config.heads),
        RM_SIZE_FIELD("local_blocks", model_config.local_blocks),
        RM_SIZE_FIELD("decoder_blocks", model_config.decoder_blocks),
        RM_SIZE_FIELD("descriptors", model_config.descriptors),
        RM_SIZE_FIELD("window", model_config.window),
        RM_SIZE_FIELD("future_steps", model_config.future_steps),
        RM_SIZE_FIELD("ego_blocks", model_config.ego_blocks),
        RM_SIZE_FIELD("mlp_ratio", model_config.mlp_ratio),
        RM_SIZE_FIELD("head_hidden", model_config.head_hidden),
        {"projector",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             const auto w = parse_list(k, v);
             if (w.size() != 3) bad_value(k, v, "three comma-separated widths");
             c.model_config.projector = {w[0], w[1], w[2]};
         },
         [](const RunConfig& c) {
             const auto& p = c.model_config.projector;
             return join({p[0], p[1], p[2]});
         }},
        {"pool", [](RunConfig& c, const std::string&, const std::string& v) { c.model_config.pool = parse_pool_axis(v); },
         [](const RunConfig& c) { return to_string(c.model_config.pool); }},
        RM_DOUBLE_FIELD("coordinate_scale", model_config.coordinate_scale),
        RM_SIZE_FIELD("vit_dim", model_config.vit_dim),
        RM_SIZE_FIELD("vit_heads", model_config.vit_heads),
        RM_SIZE_FIELD("vit_depth", model_config.vit_depth),
        RM_SIZE_FIELD("validate_every", validate_every),
        RM_SIZE_FIELD("validation_scenes", validation_scenes),
        {"strip_agents", [](RunConfig& c, const std::string& k, const std::string& v) { c.strip_agents = parse_bool(k, v); },
         [](const RunConfig& c) { return std::string(c.strip_agents ? "true" : "false"); }},
        RM_SIZE_FIELD("threads", threads),
        RM_SIZE_FIELD("prefetch", prefetch),
        {"horizons", [](RunConfig& c, const std::string& k, const std::string& v) { c.horizons = parse_list(k, v); },
         [](const RunConfig& c) { return join(c.horizons); }},
    };
    return table;
}

#undef RM_SIZE_FIELD
#undef RM_DOUBLE_FIELD
#undef RM_PATH_FIELD

}  // namespace

std::string to_string(RunMode mode)
{
    switch (mode) {
    case RunMode::pretrain_rbt: return "pretrain_rbt";
    case RunMode::pretrain_simclr: return "pretrain_simclr";
    case RunMode::pretrain_tmcl: return "pretrain_tmcl";
    case RunMode::pretrain_mcl_tmcl: return "pretrain_mcl_tmcl";
    case RunMode::finetune: return "finetune";
    case RunMode::joint_rbt_aux: return "joint_rbt_aux";
    case RunMode::eval: return "eval";
    }
    return "unknown";
}

std::string to_string(ModelKind kind)
{
    switch (kind) {
    case ModelKind::redmotion: return "redmotion";
    case ModelKind::motion_vit: return "motion_vit";
    case ModelKind::dual_motion_vit: return "dual_motion_vit";
    }
    return "unknown";
}

RunMode parse_run_mode(const std::string& text)
{
    for (auto m : {RunMode::pretrain_rbt, RunMode::pretrain_simclr, RunMode::pretrain_tmcl, RunMode::pretrain_mcl_tmcl,
                   RunMode::finetune, RunMode::joint_rbt_aux, RunMode::eval}) {
        if (to_string(m) == text) return m;
    }
    throw std::invalid_argument("unknown run mode '" + text + "'");
}

ModelKind parse_model_kind(const std::string& text)
{
    for (auto k : {ModelKind::redmotion, ModelKind::motion_vit, ModelKind::dual_motion_vit}) {
        if (to_string(k) == text) return k;
    }
    throw std::invalid_argument("unknown model '" + text + "'");
}

bool is_pretrain(RunMode mode)
{
    return mode == RunMode::pretrain_rbt || mode == RunMode::pretrain_simclr || mode == RunMode::pretrain_tmcl ||
           mode == RunMode::pretrain_mcl_tmcl;
}

void RunConfig::validate() const
{
    if (!(lr_final > 0.0) || lr_init < lr_final) throw std::invalid_argument("run config: need lr_init >= lr_final > 0");
    if (steps == 0) throw std::invalid_argument("run config: step budget must be at least 1");
    if (batch_size == 0) throw std::invalid_argument("run config: batch_size must be at least 1");
    if (!(fds > 0.0 && fds <= 1.0)) throw std::invalid_argument("run config: fds must lie in (0, 1]");
    if (horizons.empty()) throw std::invalid_argument("run config: horizons must not be empty");
    for (auto h : horizons) {
        if (h == 0 || h > model_config.future_steps) {
            throw std::invalid_argument("run config: horizon " + std::to_string(h) + " outside [1, future_steps]");
        }
    }
    if (!(optimizer.weight_decay >= 0.0)) throw std::invalid_argument("run config: weight_decay must be nonnegative");
    loss.validate();
    model_config.validate();
}

std::vector<std::string> run_config_keys()
{
    std::vector<std::string> keys;
    for (const auto& f : fields()) keys.emplace_back(f.key);
    return keys;
}

void apply_run_option(RunConfig& config, const std::string& key, const std::string& value)
{
    for (const auto& f : fields()) {
        if (key == f.key) {
            f.set(config, key, trim(value));
            return;
        }
    }
    throw std::invalid_argument("run config: unknown key '" + key + "'");
}

void apply_run_config_file(RunConfig& config, const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open run config '" + path.string() + "'");
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument(path.string() + ":" + std::to_string(number) + ": expected key = value");
        }
        try {
            apply_run_option(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(path.string() + ":" + std::to_string(number) + ": " + e.what());
        }
    }
}

std::string describe(const RunConfig& config)
{
    std::string out;
    for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(config) + "\n";
    return out;
}

std::string model_digest(ModelKind kind, const ModelConfig& config)
{
    const std::string text = to_string(kind) + "|" + config.canonical();
    return nn::hex_digest(nn::fnv1a(text.data(), text.size()));
}

}  // namespace redmotion
