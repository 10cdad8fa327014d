#include "redmotion/harness.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <fstream>
#include <memory>
#include <random>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "redmotion/data/dataset.hpp"
#include "redmotion/log.hpp"
#include "redmotion/losses.hpp"
#include "redmotion/raster.hpp"
#include "redmotion/raster_baseline.hpp"
#include "redmotion/red_encoder.hpp"
#include "redmotion/tokenizer.hpp"

namespace redmotion {

using nlohmann::json;
using nn::ParameterStore;
using nn::Tape;
using nn::Tensor;
using nn::Var;

// ---------------------------------------------------------------------------
// Training log

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json record_json(const TrainingRecord& r, bool with_time)
{
    json j;
    j["step"] = r.step;
    j["loss"] = r.loss;
    if (r.nll) j["nll"] = *r.nll;
    if (r.bt) j["bt"] = *r.bt;
    if (r.nce) j["nce"] = *r.nce;
    j["lr"] = r.lr;
    if (with_time) j["time_ms"] = r.time_ms;
    if (r.val_loss) j["val_loss"] = *r.val_loss;
    return j;
}

}  // namespace

void TrainingLog::append(const TrainingRecord& record)
{
    if (!records_.empty() && record.step <= records_.back().step) {
        throw std::logic_error("training log: step index must increase");
    }
    records_.push_back(record);
}

std::string TrainingLog::to_jsonl(bool with_time) const
{
    std::string out;
    for (const auto& r : records_) out += record_json(r, with_time).dump() + "\n";
    return out;
}

void TrainingLog::write(const std::filesystem::path& path) const
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write training log '" + path.string() + "'");
    out << to_jsonl();
}

// ---------------------------------------------------------------------------
// Samples

std::vector<PreparedSample> labeled_samples(std::span<const RoadScene> scenes, std::size_t future_steps)
{
    std::vector<PreparedSample> out;
    for (const auto& scene : scenes) {
        for (const auto& future : scene.future_truth) {
            const AgentTrack* track = scene.track(future.track_id);
            if (track == nullptr) continue;
            const AgentState* now = track->state_at(scene.prediction_start);
            if (now == nullptr || !now->valid) continue;
            const std::size_t n = std::min(future_steps, future.valid.size());
            if (std::none_of(future.valid.begin(), future.valid.begin() + static_cast<std::ptrdiff_t>(n),
                             [](std::uint8_t v) { return v != 0; })) {
                continue;
            }
            out.push_back(prepare_sample(scene, future.track_id, future_steps));
        }
    }
    return out;
}

std::vector<PreparedSample> ego_samples(std::span<const RoadScene> scenes, std::size_t future_steps)
{
    std::vector<PreparedSample> out;
    out.reserve(scenes.size());
    for (const auto& scene : scenes) out.push_back(prepare_sample(scene, scene.ego_id, future_steps));
    return out;
}

std::vector<RoadScene> labeled_subset(std::span<const RoadScene> scenes, double fds, std::uint64_t seed)
{
    if (fds >= 1.0) return {scenes.begin(), scenes.end()};
    return data::split_dataset(scenes, {fds, seed}).first;
}

namespace {

// ---------------------------------------------------------------------------
// Model adapters

struct ViewInput {
    std::vector<RoadEnvToken> tokens;
    std::optional<RasterImage> raster;
};

struct SampleInputs {
    const PreparedSample* sample = nullptr;
    std::optional<RasterImage> raster;        // full raster, or the map raster for the dual model
    std::optional<RasterImage> agent_raster;  // dual model only
    std::optional<ViewInput> view_a;
    std::optional<ViewInput> view_b;
};

struct AdapterNeeds {
    bool motion = true;
    bool projector = false;
    bool trajectory = false;
};

LocalRoadGraph without_agents(const LocalRoadGraph& graph)
{
    LocalRoadGraph out = graph;
    out.agents.clear();
    return out;
}

class ModelAdapter {
public:
    virtual ~ModelAdapter() = default;
    virtual void prepare_motion(SampleInputs& in) const = 0;
    virtual ViewInput make_view(const PreparedSample& sample, bool map_only, std::mt19937_64* augment) const = 0;
    // Forward of the motion path. When `embedding` is non-null and the model
    // can reuse the motion forward for the unaugmented view, it is filled.
    virtual HeadOutput motion(Tape& tape, const SampleInputs& in, std::optional<Var>* embedding) const = 0;
    virtual Var embed_view(Tape& tape, const ViewInput& view) const = 0;
    virtual Var embed_trajectory(Tape&, const PreparedSample&) const
    {
        throw std::invalid_argument("trajectory contrastive pre-training is only available for the redmotion model");
    }
};

class RedMotionAdapter final : public ModelAdapter {
public:
    RedMotionAdapter(ParameterStore& store, const ModelConfig& config, AdapterNeeds needs)
    {
        if (needs.motion || needs.trajectory) {
            model_ = RedMotion(store, config, {needs.projector, needs.trajectory, needs.motion});
            encoder_ = &model_->encoder();
        } else {
            encoder_only_ = RedEncoder(store, config, needs.projector);
            encoder_ = &*encoder_only_;
        }
    }

    void prepare_motion(SampleInputs&) const override {}

    ViewInput make_view(const PreparedSample& sample, bool map_only, std::mt19937_64* augment) const override
    {
        if (!map_only && augment == nullptr) return {sample.road_tokens, std::nullopt};
        LocalRoadGraph graph = map_only ? without_agents(sample.graph) : sample.graph;
        if (augment != nullptr) graph = augment_vector_view(graph, *augment);
        return {build_road_env_tokens(graph), std::nullopt};
    }

    HeadOutput motion(Tape& tape, const SampleInputs& in, std::optional<Var>* embedding) const override
    {
        auto f = model_->forward(tape, *in.sample);
        if (embedding != nullptr) *embedding = encoder_->project(tape, f.descriptors);
        return f.head;
    }

    Var embed_view(Tape& tape, const ViewInput& view) const override
    {
        return encoder_->project(tape, encoder_->encode(tape, view.tokens));
    }

    Var embed_trajectory(Tape& tape, const PreparedSample& sample) const override
    {
        const auto valid = ego_valid_mask(sample.ego_tokens);
        return model_->project_trajectory(tape, model_->pool_trajectory(model_->encode_ego_trajectory(tape, sample.ego_tokens), valid));
    }

private:
    std::optional<RedMotion> model_;
    std::optional<RedEncoder> encoder_only_;
    const RedEncoder* encoder_ = nullptr;
};

nn::Mlp vit_projector(ParameterStore& store, const std::string& prefix, const ModelConfig& config)
{
    const std::size_t widths[] = {config.vit_dim, config.projector[0], config.projector[1], config.projector[2]};
    return nn::Mlp(store, prefix + "/projector", widths);
}

class MotionVitAdapter final : public ModelAdapter {
public:
    MotionVitAdapter(ParameterStore& store, const ModelConfig& config, AdapterNeeds needs)
        : model_(store, config, needs.motion)
    {
        if (needs.projector) projector_ = vit_projector(store, MotionVit::kPrefix, config);
    }

    void prepare_motion(SampleInputs& in) const override { in.raster = rasterize(in.sample->ego_scene); }

    ViewInput make_view(const PreparedSample& sample, bool map_only, std::mt19937_64* augment) const override
    {
        RasterImage image = rasterize(sample.ego_scene);
        if (map_only) image = map_channels(image);
        if (augment != nullptr) image = augment_raster_view(image, *augment);
        return {{}, std::move(image)};
    }

    HeadOutput motion(Tape& tape, const SampleInputs& in, std::optional<Var>* embedding) const override
    {
        Var cls = model_.class_token(tape, *in.raster);
        if (embedding != nullptr) *embedding = (*projector_)(tape, cls);
        return model_.head(tape, cls);
    }

    Var embed_view(Tape& tape, const ViewInput& view) const override
    {
        return (*projector_)(tape, model_.class_token(tape, *view.raster));
    }

private:
    MotionVit model_;
    std::optional<nn::Mlp> projector_;
};

class DualMotionVitAdapter final : public ModelAdapter {
public:
    DualMotionVitAdapter(ParameterStore& store, const ModelConfig& config, AdapterNeeds needs)
        : model_(store, config, needs.motion)
    {
        if (needs.projector) projector_ = vit_projector(store, DualMotionVit::kPrefix, config);
    }

    void prepare_motion(SampleInputs& in) const override
    {
        const RasterImage full = rasterize(in.sample->ego_scene);
        in.raster = map_channels(full);
        in.agent_raster = agent_channels(full);
    }

    // Twin views of this model are views of its map image.
    ViewInput make_view(const PreparedSample& sample, bool, std::mt19937_64* augment) const override
    {
        RasterImage image = map_channels(rasterize(sample.ego_scene));
        if (augment != nullptr) image = augment_raster_view(image, *augment);
        return {{}, std::move(image)};
    }

    HeadOutput motion(Tape& tape, const SampleInputs& in, std::optional<Var>*) const override
    {
        return model_.forward(tape, *in.raster, *in.agent_raster);
    }

    Var embed_view(Tape& tape, const ViewInput& view) const override
    {
        return (*projector_)(tape, nn::slice_rows(model_.map_encoder()(tape, *view.raster), 0, 1));
    }

private:
    DualMotionVit model_;
    std::optional<nn::Mlp> projector_;
};

std::unique_ptr<ModelAdapter> make_adapter(ModelKind kind, ParameterStore& store, const ModelConfig& config, AdapterNeeds needs)
{
    switch (kind) {
    case ModelKind::redmotion: return std::make_unique<RedMotionAdapter>(store, config, needs);
    case ModelKind::motion_vit: return std::make_unique<MotionVitAdapter>(store, config, needs);
    case ModelKind::dual_motion_vit: return std::make_unique<DualMotionVitAdapter>(store, config, needs);
    }
    throw std::invalid_argument("unknown model kind");
}

// ---------------------------------------------------------------------------
// Objectives

enum class Objective { motion, joint, rbt, simclr, tmcl, mcl_tmcl };

Objective objective_for(RunMode mode)
{
    switch (mode) {
    case RunMode::pretrain_rbt: return Objective::rbt;
    case RunMode::pretrain_simclr: return Objective::simclr;
    case RunMode::pretrain_tmcl: return Objective::tmcl;
    case RunMode::pretrain_mcl_tmcl: return Objective::mcl_tmcl;
    case RunMode::finetune: return Objective::motion;
    case RunMode::joint_rbt_aux: return Objective::joint;
    case RunMode::eval: break;
    }
    throw std::invalid_argument("run mode " + to_string(mode) + " does not train");
}

AdapterNeeds needs_for(Objective objective)
{
    switch (objective) {
    case Objective::motion: return {true, false, false};
    case Objective::joint: return {true, true, false};
    case Objective::rbt:
    case Objective::simclr: return {false, true, false};
    case Objective::tmcl:
    case Objective::mcl_tmcl: return {false, true, true};
    }
    return {};
}

bool is_motion(Objective o) { return o == Objective::motion || o == Objective::joint; }

std::uint64_t mix(std::uint64_t a, std::uint64_t b)
{
    std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

SampleInputs prepare_inputs(Objective objective, const ModelAdapter& adapter, const PreparedSample& sample, std::uint64_t seed)
{
    SampleInputs in;
    in.sample = &sample;
    std::mt19937_64 rng(seed);
    switch (objective) {
    case Objective::motion: adapter.prepare_motion(in); break;
    case Objective::joint:
        adapter.prepare_motion(in);
        in.view_a = adapter.make_view(sample, false, nullptr);
        in.view_b = adapter.make_view(sample, false, &rng);
        break;
    case Objective::rbt:
    case Objective::simclr:
    case Objective::mcl_tmcl:
        in.view_a = adapter.make_view(sample, true, nullptr);
        in.view_b = adapter.make_view(sample, true, &rng);
        break;
    case Objective::tmcl: in.view_a = adapter.make_view(sample, true, nullptr); break;
    }
    return in;
}

std::vector<Var> sample_forward(Objective objective, const ModelAdapter& adapter, Tape& tape, const SampleInputs& in)
{
    switch (objective) {
    case Objective::motion: {
        const HeadOutput h = adapter.motion(tape, in, nullptr);
        return {h.proposals, h.logits};
    }
    case Objective::joint: {
        std::optional<Var> za;
        const HeadOutput h = adapter.motion(tape, in, &za);
        if (!za) za = adapter.embed_view(tape, *in.view_a);
        return {h.proposals, h.logits, *za, adapter.embed_view(tape, *in.view_b)};
    }
    case Objective::rbt:
    case Objective::simclr: return {adapter.embed_view(tape, *in.view_a), adapter.embed_view(tape, *in.view_b)};
    case Objective::tmcl: return {adapter.embed_view(tape, *in.view_a), adapter.embed_trajectory(tape, *in.sample)};
    case Objective::mcl_tmcl:
        return {adapter.embed_view(tape, *in.view_a), adapter.embed_view(tape, *in.view_b),
                adapter.embed_trajectory(tape, *in.sample)};
    }
    return {};
}

struct LossParts {
    Var total;
    std::optional<double> nll;
    std::optional<double> bt;
    std::optional<double> nce;
};

Var stack(const std::vector<std::vector<Var>>& leaves, std::size_t column)
{
    std::vector<Var> rows;
    rows.reserve(leaves.size());
    for (const auto& l : leaves) rows.push_back(l[column]);
    return nn::concat_rows(rows);
}

Var mean_nll(const std::vector<std::vector<Var>>& leaves, std::span<const SampleInputs> inputs)
{
    std::vector<Var> terms;
    for (std::size_t b = 0; b < leaves.size(); ++b) {
        const auto& truth = inputs[b].sample->truth;
        if (!truth) throw std::invalid_argument("motion loss: sample without future labels");
        terms.push_back(nll_mixture_loss(leaves[b][0], leaves[b][1], truth->positions, truth->valid));
    }
    return nn::scale(nn::sum(nn::concat_rows(terms)), 1.0 / static_cast<double>(terms.size()));
}

LossParts batch_loss(Objective objective, const LossConfig& cfg, const std::vector<std::vector<Var>>& leaves,
                     std::span<const SampleInputs> inputs)
{
    LossParts p;
    switch (objective) {
    case Objective::motion:
        p.total = mean_nll(leaves, inputs);
        p.nll = p.total.value().data[0];
        break;
    case Objective::joint: {
        Var nll = mean_nll(leaves, inputs);
        Var bt = barlow_twins_loss(stack(leaves, 2), stack(leaves, 3), cfg.bt_lambda);
        p.total = nn::add(nll, nn::scale(bt, cfg.aux_beta));
        p.nll = nll.value().data[0];
        p.bt = bt.value().data[0];
        break;
    }
    case Objective::rbt:
        p.total = barlow_twins_loss(stack(leaves, 0), stack(leaves, 1), cfg.bt_lambda);
        p.bt = p.total.value().data[0];
        break;
    case Objective::simclr:
    case Objective::tmcl:
        p.total = info_nce_loss(stack(leaves, 0), stack(leaves, 1), cfg.nce_temperature);
        p.nce = p.total.value().data[0];
        break;
    case Objective::mcl_tmcl: {
        Var map = stack(leaves, 0);
        p.total = nn::add(info_nce_loss(map, stack(leaves, 1), cfg.nce_temperature),
                          info_nce_loss(map, stack(leaves, 2), cfg.nce_temperature));
        p.nce = p.total.value().data[0];
        break;
    }
    }
    return p;
}

struct BatchResult {
    double loss = 0.0;
    std::optional<double> nll;
    std::optional<double> bt;
    std::optional<double> nce;
    std::vector<Tensor> grads;  // one per store parameter, empty if untouched
};

/// Per-sample forward on private tapes, the batch loss on a separate tape,
/// then per-sample backward seeded with the loss-tape gradients. Gradients
/// are reduced in sample order, so the result does not depend on threading.
BatchResult evaluate_batch(Objective objective, const LossConfig& cfg, const ModelAdapter& adapter, const ParameterStore& store,
                           std::span<const SampleInputs> inputs, bool with_grads, std::size_t threads)
{
    const std::size_t n = inputs.size();
    std::vector<std::unique_ptr<Tape>> tapes(n);
    std::vector<std::vector<Var>> outs(n);
    parallel_for(n, threads, [&](std::size_t b) {
        tapes[b] = std::make_unique<Tape>(&store);
        outs[b] = sample_forward(objective, adapter, *tapes[b], inputs[b]);
    });

    Tape loss_tape;
    std::vector<std::vector<Var>> leaves(n);
    for (std::size_t b = 0; b < n; ++b) {
        for (const Var& v : outs[b]) leaves[b].push_back(with_grads ? loss_tape.input(v.value()) : loss_tape.constant(v.value()));
    }
    const LossParts parts = batch_loss(objective, cfg, leaves, inputs);
    BatchResult result{parts.total.value().data[0], parts.nll, parts.bt, parts.nce, {}};
    if (!with_grads) return result;

    loss_tape.backward(parts.total);
    std::vector<std::vector<std::pair<nn::ParamId, Tensor>>> per_sample(n);
    parallel_for(n, threads, [&](std::size_t b) {
        std::vector<Tensor> seeds;
        for (const Var& leaf : leaves[b]) seeds.push_back(loss_tape.grad(leaf));
        tapes[b]->backward(outs[b], seeds);
        per_sample[b] = tapes[b]->param_grads();
        tapes[b].reset();
    });
    result.grads.resize(store.size());
    for (const auto& grads : per_sample) {
        for (const auto& [id, g] : grads) {
            Tensor& dst = result.grads[id.index];
            if (dst.empty()) {
                dst = g;
            } else {
                for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += g.data[i];
            }
        }
    }
    return result;
}

bool is_twin(Objective o) { return o != Objective::motion; }

// Mean loss over fixed chunks of the sample list. Twin objectives need at
// least two samples per chunk, so a trailing single sample joins the previous chunk.
std::optional<BatchResult> evaluate_set(Objective objective, const RunConfig& cfg, const ModelAdapter& adapter,
                                        const ParameterStore& store, std::span<const PreparedSample> samples, std::uint64_t salt)
{
    if (samples.empty()) return std::nullopt;
    const std::size_t chunk = std::max<std::size_t>(cfg.batch_size, is_twin(objective) ? 2 : 1);
    BatchResult total;
    double weight = 0.0;
    std::size_t start = 0;
    while (start < samples.size()) {
        std::size_t end = std::min(samples.size(), start + chunk);
        if (is_twin(objective) && samples.size() - end == 1) end = samples.size();
        std::vector<SampleInputs> inputs;
        for (std::size_t i = start; i < end; ++i) inputs.push_back(prepare_inputs(objective, adapter, samples[i], mix(salt, i)));
        const BatchResult r = evaluate_batch(objective, cfg.loss, adapter, store, inputs, false, cfg.threads);
        const double w = static_cast<double>(end - start);
        total.loss += w * r.loss;
        if (r.nll) total.nll = total.nll.value_or(0.0) + w * *r.nll;
        weight += w;
        start = end;
    }
    total.loss /= weight;
    if (total.nll) *total.nll /= weight;
    return total;
}

struct Batch {
    std::size_t step = 0;
    std::vector<SampleInputs> inputs;
};

// Epoch-wise shuffled index stream.
class Sampler {
public:
    Sampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed)
    {
        for (std::size_t i = 0; i < n; ++i) order_[i] = i;
        reshuffle();
    }

    std::size_t next()
    {
        if (pos_ == order_.size()) reshuffle();
        return order_[pos_++];
    }

private:
    void reshuffle()
    {
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
    }

    std::vector<std::size_t> order_;
    std::mt19937_64 rng_;
    std::size_t pos_ = 0;
};

constexpr std::uint64_t kBatchSalt = 0x6261746368ULL;
constexpr std::uint64_t kAugmentSalt = 0x6175676dULL;
constexpr std::uint64_t kValidationSalt = 0x76616cULL;
constexpr std::uint64_t kTrainEvalSalt = 0x74726eULL;

RunResult train(const RunConfig& cfg, Objective objective, ModelKind kind, ParameterStore& store, const ModelAdapter& adapter,
                std::span<const PreparedSample> train_set, std::span<const PreparedSample> validation)
{
    if (train_set.empty()) throw std::invalid_argument("training: no usable training samples");
    const auto started = std::chrono::steady_clock::now();
    RunResult result;
    result.train_samples = train_set.size();
    result.validation_samples = validation.size();

    AdamW optimizer(store, cfg.optimizer);
    BoundedQueue<Batch> queue(cfg.prefetch);
    std::exception_ptr producer_error;
    std::thread producer([&] {
        try {
            Sampler sampler(train_set.size(), mix(cfg.seed, kBatchSalt));
            for (std::size_t step = 0; step < cfg.steps; ++step) {
                Batch batch{step, {}};
                for (std::size_t j = 0; j < cfg.batch_size; ++j) {
                    const std::size_t idx = sampler.next();
                    batch.inputs.push_back(
                        prepare_inputs(objective, adapter, train_set[idx], mix(mix(cfg.seed, kAugmentSalt), step * cfg.batch_size + j)));
                }
                if (!queue.push(std::move(batch))) break;
            }
        } catch (...) {
            producer_error = std::current_exception();
        }
        queue.close();
    });

    const auto finish_producer = [&] {
        queue.close();
        if (producer.joinable()) producer.join();
    };
    try {
        const std::size_t last = cfg.steps - 1;
        while (auto batch = queue.pop()) {
            const auto t0 = std::chrono::steady_clock::now();
            const double lr = cosine_lr(batch->step, last, cfg.lr_init, cfg.lr_final);
            const BatchResult r = evaluate_batch(objective, cfg.loss, adapter, store, batch->inputs, true, cfg.threads);
            optimizer.step(store, r.grads, lr);
            const auto t1 = std::chrono::steady_clock::now();

            TrainingRecord rec;
            rec.step = batch->step;
            rec.loss = r.loss;
            rec.nll = r.nll;
            rec.bt = r.bt;
            rec.nce = r.nce;
            rec.lr = lr;
            rec.time_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
            const bool validate_now = cfg.validate_every > 0 && ((batch->step + 1) % cfg.validate_every == 0 || batch->step == last);
            if (validate_now && !validation.empty()) {
                const auto v = evaluate_set(objective, cfg, adapter, store, validation, mix(cfg.seed, kValidationSalt));
                rec.val_loss = is_motion(objective) ? v->nll : std::optional<double>(v->loss);
            }
            result.log.append(rec);
        }
    } catch (...) {
        finish_producer();
        throw;
    }
    finish_producer();
    if (producer_error) std::rethrow_exception(producer_error);

    if (is_motion(objective)) {
        result.final_train_nll = evaluate_set(Objective::motion, cfg, adapter, store, train_set, kTrainEvalSalt)->nll;
        if (!validation.empty()) {
            result.final_val_nll = evaluate_set(Objective::motion, cfg, adapter, store, validation, kTrainEvalSalt)->nll;
        }
    }
    result.checkpoint = nn::snapshot(store, model_digest(kind, cfg.model_config));
    result.parameter_digest = nn::hex_digest(store.digest());
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

std::vector<RoadScene> validation_scenes(const RunConfig& cfg, const Datasets& data)
{
    const std::size_t n = std::min(cfg.validation_scenes, data.holdout.size());
    return {data.holdout.begin(), data.holdout.begin() + static_cast<std::ptrdiff_t>(n)};
}

std::vector<RoadScene> map_only_scenes(const RunConfig& cfg, std::span<const RoadScene> scenes, const char* which)
{
    std::vector<RoadScene> out;
    for (const auto& s : scenes) {
        if (s.map_only) {
            out.push_back(s);
        } else if (cfg.strip_agents) {
            out.push_back(data::strip_agents(s));
        } else {
            throw std::invalid_argument(to_string(cfg.mode) + " needs map-only " + which + " scenes (scene '" + s.id +
                                        "' has agents); set strip_agents = true to derive them");
        }
    }
    return out;
}

void require_labels(std::span<const RoadScene> scenes)
{
    for (const auto& s : scenes) {
        if (s.future_truth.empty()) throw std::invalid_argument("scene '" + s.id + "' has no future labels");
    }
}

RunResult run_motion(const RunConfig& cfg, const Datasets& data, const nn::Checkpoint* init, Objective objective)
{
    cfg.validate();
    require_labels(data.train);
    const auto subset = labeled_subset(data.train, cfg.fds, cfg.seed);
    const auto train_set = labeled_samples(subset, cfg.model_config.future_steps);
    const auto val_scenes = validation_scenes(cfg, data);
    const auto validation = labeled_samples(val_scenes, cfg.model_config.future_steps);

    ParameterStore store(cfg.seed);
    const auto adapter = make_adapter(cfg.model, store, cfg.model_config, needs_for(objective));
    std::vector<std::string> loaded;
    if (init != nullptr) {
        const auto summary = nn::load_into(store, *init, false);
        if (summary.loaded.empty()) warn("init checkpoint shares no parameter names with the " + to_string(cfg.model) + " model");
        loaded = summary.loaded;
    }
    RunResult r = train(cfg, objective, cfg.model, store, *adapter, train_set, validation);
    r.init_loaded = std::move(loaded);
    return r;
}

}  // namespace

RunResult run_pretrain(const RunConfig& config, const Datasets& data)
{
    config.validate();
    const Objective objective = objective_for(config.mode);
    if (is_motion(objective)) throw std::invalid_argument("run_pretrain: mode " + to_string(config.mode) + " is not a pre-training mode");
    std::vector<RoadScene> train_scenes;
    std::vector<RoadScene> val_scenes = validation_scenes(config, data);
    if (objective == Objective::rbt || objective == Objective::simclr) {
        train_scenes = map_only_scenes(config, data.train, "training");
        val_scenes = map_only_scenes(config, val_scenes, "holdout");
    } else {
        if (config.model != ModelKind::redmotion) {
            throw std::invalid_argument(to_string(config.mode) + " is only available for the redmotion model");
        }
        for (const std::vector<RoadScene>* set : {&data.train, static_cast<const std::vector<RoadScene>*>(&val_scenes)}) {
            for (const auto& s : *set) {
                if (s.map_only) throw std::invalid_argument(to_string(config.mode) + " needs agent trajectories; scene '" + s.id + "' is map-only");
            }
        }
        train_scenes = data.train;
    }
    const auto train_set = ego_samples(train_scenes, config.model_config.future_steps);
    const auto validation = ego_samples(val_scenes, config.model_config.future_steps);
    ParameterStore store(config.seed);
    const auto adapter = make_adapter(config.model, store, config.model_config, needs_for(objective));
    return train(config, objective, config.model, store, *adapter, train_set, validation);
}

RunResult run_finetune(const RunConfig& config, const Datasets& data, const nn::Checkpoint* init)
{
    return run_motion(config, data, init, Objective::motion);
}

RunResult run_joint_aux(const RunConfig& config, const Datasets& data, const nn::Checkpoint* init)
{
    return run_motion(config, data, init, Objective::joint);
}

EvalOutput evaluate_predictions(std::span<const PredictionRecord> predictions, std::span<const PreparedSample> samples,
                                std::span<const std::size_t> horizons)
{
    if (predictions.size() != samples.size()) throw std::invalid_argument("evaluate_predictions: prediction/sample count mismatch");
    EvalOutput out;
    out.predictions.assign(predictions.begin(), predictions.end());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (!s.truth) throw std::invalid_argument("evaluate_predictions: sample without future labels");
        out.agents.push_back(evaluate_agent(s.scene_id, s.agent_id, s.kind, predictions[i].prediction, *s.truth, horizons));
    }
    const AgentKind classes[] = {AgentKind::vehicle, AgentKind::pedestrian, AgentKind::cyclist};
    out.report = aggregate_by_class(out.agents, classes, horizons);
    return out;
}

EvalOutput run_eval(const RunConfig& config, const nn::Checkpoint& checkpoint, std::span<const RoadScene> scenes)
{
    config.validate();
    const std::string expected = model_digest(config.model, config.model_config);
    if (checkpoint.config_digest != expected) {
        throw std::invalid_argument("checkpoint config digest " + checkpoint.config_digest + " does not match the configured " +
                                    to_string(config.model) + " model (" + expected + ")");
    }
    require_labels(scenes);
    ParameterStore store(config.seed);
    const auto adapter = make_adapter(config.model, store, config.model_config, {true, false, false});
    const auto summary = nn::load_into(store, checkpoint, false);
    if (!summary.missing.empty()) {
        throw std::invalid_argument("checkpoint lacks parameter '" + summary.missing.front() + "' of the " + to_string(config.model) + " model");
    }
    const auto samples = labeled_samples(scenes, config.model_config.future_steps);
    std::vector<PredictionRecord> predictions(samples.size());
    parallel_for(samples.size(), config.threads, [&](std::size_t i) {
        SampleInputs in;
        in.sample = &samples[i];
        adapter->prepare_motion(in);
        Tape tape(&store);
        predictions[i] = {samples[i].scene_id, samples[i].agent_id, samples[i].kind, to_prediction(adapter->motion(tape, in, nullptr))};
    });
    return evaluate_predictions(predictions, samples, config.horizons);
}

void write_predictions(std::span<const PredictionRecord> predictions, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write predictions '" + path.string() + "'");
    for (const auto& p : predictions) {
        json proposals = json::array();
        for (std::size_t k = 0; k < p.prediction.modes(); ++k) {
            json traj = json::array();
            for (std::size_t t = 0; t < p.prediction.steps; ++t) traj.push_back({p.prediction.at(k, t).x, p.prediction.at(k, t).y});
            proposals.push_back(std::move(traj));
        }
        json j = {{"scene_id", p.scene_id},
                  {"agent_id", p.agent_id},
                  {"class", std::string(to_string(p.kind))},
                  {"proposals", std::move(proposals)},
                  {"confidences", p.prediction.confidences}};
        out << j.dump() << '\n';
    }
}

namespace {

Datasets load_datasets(const RunConfig& cfg, bool need_train)
{
    Datasets d;
    if (need_train) {
        if (cfg.train_data.empty()) throw std::invalid_argument("train_data is required for " + to_string(cfg.mode));
        d.train = data::load_scenarios(cfg.train_data);
    }
    if (!cfg.holdout_data.empty()) d.holdout = data::load_scenarios(cfg.holdout_data);
    return d;
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
}

}  // namespace

RunResult run_mode_from_files(const RunConfig& config)
{
    config.validate();
    if (config.mode == RunMode::eval) throw std::invalid_argument("use run_eval_from_files for eval");
    const Datasets data = load_datasets(config, true);
    std::optional<nn::Checkpoint> init;
    if (!config.init_checkpoint.empty()) {
        if (is_pretrain(config.mode)) throw std::invalid_argument("init_checkpoint is not used by pre-training modes");
        init = nn::load_checkpoint(config.init_checkpoint);
    }
    RunResult r;
    if (is_pretrain(config.mode)) {
        r = run_pretrain(config, data);
    } else if (config.mode == RunMode::finetune) {
        r = run_finetune(config, data, init ? &*init : nullptr);
    } else {
        r = run_joint_aux(config, data, init ? &*init : nullptr);
    }

    std::filesystem::create_directories(config.out_dir);
    nn::save_checkpoint(r.checkpoint, config.out_dir / "checkpoint.rmck");
    r.log.write(config.out_dir / "training_log.jsonl");
    write_text(config.out_dir / "run_config.txt", describe(config));
    json summary = {{"mode", to_string(config.mode)},
                    {"model", to_string(config.model)},
                    {"steps", config.steps},
                    {"train_samples", r.train_samples},
                    {"validation_samples", r.validation_samples},
                    {"parameter_digest", r.parameter_digest},
                    {"config_digest", r.checkpoint.config_digest},
                    {"seconds", r.seconds},
                    {"init_parameters_loaded", r.init_loaded.size()},
                    {"final_train_nll", optional_json(r.final_train_nll)},
                    {"final_val_nll", optional_json(r.final_val_nll)}};
    if (r.final_train_nll && r.final_val_nll) summary["generalization_gap"] = *r.final_val_nll - *r.final_train_nll;
    write_text(config.out_dir / "summary.json", summary.dump(2) + "\n");
    return r;
}

EvalOutput run_eval_from_files(const RunConfig& config)
{
    if (config.holdout_data.empty()) throw std::invalid_argument("eval needs holdout_data");
    if (config.init_checkpoint.empty()) throw std::invalid_argument("eval needs a checkpoint");
    const Datasets data = load_datasets(config, false);
    const nn::Checkpoint checkpoint = nn::load_checkpoint(config.init_checkpoint);
    EvalOutput out = run_eval(config, checkpoint, data.holdout);
    if (!config.baseline_report.empty()) {
        compare_to_baseline(out.report, read_report(config.baseline_report), config.baseline_report.stem().string());
    }
    std::filesystem::create_directories(config.out_dir);
    write_agent_csv(out.agents, config.horizons, config.out_dir / "metrics.csv");
    write_report(out.report, config.out_dir / "report.json");
    write_predictions(out.predictions, config.out_dir / "predictions.jsonl");
    return out;
}

}  // namespace redmotion
