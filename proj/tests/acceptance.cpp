// Acceptance runner: one PASS/FAIL line per criterion, exit code 1 if any fails.
// Usage: redmotion_acceptance [criterion numbers...]   (default: all)

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "checks.hpp"
#include "grad_cases.hpp"
#include "redmotion/data/dataset.hpp"
#include "redmotion/data/synthetic.hpp"
#include "redmotion/harness.hpp"
#include "redmotion/log.hpp"
#include "redmotion/metrics.hpp"
#include "redmotion/motion_model.hpp"
#include "redmotion/raster_baseline.hpp"
#include "tiny.hpp"

using namespace redmotion;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int precision = 4)
{
    std::ostringstream o;
    o.precision(precision);
    o << v;
    return o.str();
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---- 1 ---------------------------------------------------------------------
Outcome loss_oracles()
{
    std::mt19937_64 rng(1001);
    std::uniform_int_distribution<std::size_t> dim(2, 8);
    double worst_bt = 0.0, worst_nce = 0.0, worst_nll = 0.0;
    for (int i = 0; i < 100; ++i) {
        const std::size_t b = dim(rng), p = dim(rng);
        const auto a = rmtest::random_tensor(rng, b, p);
        const auto c = rmtest::random_tensor(rng, b, p);
        worst_bt = std::max(worst_bt, std::abs(barlow_twins_loss(a, c, 5e-3) - rmtest::ref_barlow_twins(a, c, 5e-3)));
        worst_nce = std::max(worst_nce, std::abs(info_nce_loss(a, c, 0.1) - rmtest::ref_info_nce(a, c, 0.1)));

        const std::size_t steps = 1 + i % 8;
        const auto mu = rmtest::random_tensor(rng, kModes, 2 * steps);
        const auto z = rmtest::random_tensor(rng, 1, kModes, -2.0, 2.0);
        auto truth = rmtest::random_truth(rng, steps, 0.25);
        for (auto& q : truth.positions) q = 0.1 * q;
        truth.valid[steps - 1] = 1;
        nn::Tape tape;
        const double got = nll_mixture_loss(tape.constant(mu), tape.constant(z), truth.positions, truth.valid).value().data[0];
        worst_nll = std::max(worst_nll, std::abs(got - rmtest::ref_nll(mu, z, truth.positions, truth.valid)));
    }
    const double worst = std::max({worst_bt, worst_nce, worst_nll});
    return {worst <= 1e-8, "max abs error bt " + fmt(worst_bt) + ", nce " + fmt(worst_nce) + ", nll " + fmt(worst_nll) +
                               " (tol 1e-8, 100 instances each)"};
}

// ---- 2 ---------------------------------------------------------------------
Outcome gradient_suite()
{
    double worst = 0.0;
    std::string worst_name;
    std::size_t count = 0;
    for (std::uint64_t seed : {11u, 12u, 13u}) {
        for (const auto& c : rmtest::gradient_cases(seed)) {
            const auto r = rmtest::check_gradients(c.fn, c.inputs, 1e-5);
            ++count;
            if (!(r.rel_error <= worst)) {
                worst = r.rel_error;
                worst_name = c.name;
            }
        }
    }
    return {worst < 1e-4, std::to_string(count) + " checks, worst rel err " + fmt(worst) + " (" + worst_name + "), tol 1e-4"};
}

// ---- 3 ---------------------------------------------------------------------
Outcome local_attention()
{
    double worst = 0.0;
    for (std::size_t w : {2u, 4u, 8u, 16u})
        for (std::size_t n = 1; n <= 32; ++n) worst = std::max(worst, rmtest::local_attention_gap(n, w, 100 * w + n));
    return {worst <= 1e-6, "max |local - banded global| " + fmt(worst) + " over n=1..32, w in {2,4,8,16} (tol 1e-6)"};
}

// ---- 4 ---------------------------------------------------------------------
Outcome receptive_field()
{
    bool ok = true;
    std::string detail;
    for (std::size_t layers : {1u, 2u, 3u}) {
        for (std::size_t w : {2u, 4u}) {
            const auto rf = rmtest::receptive_field(layers, w, 20);
            ok = ok && rf.zero_outside;
            detail += "L" + std::to_string(layers) + "w" + std::to_string(w) + (rf.zero_outside ? ":0" : ":LEAK") +
                      (rf.nonzero_inside ? " " : "(dead inside) ");
        }
    }
    return {ok, "exact zeros beyond L*w/2 on 20 tokens: " + detail};
}

// ---- 5 ---------------------------------------------------------------------
Outcome fixed_size_red()
{
    nn::ParameterStore store(5);
    const auto cfg = rmtest::tiny_model();
    RedEncoder enc(store, cfg, false);
    std::mt19937_64 rng(5);
    bool ok = true;
    std::string shapes;
    for (std::size_t n : {1u, 7u, 64u, 256u}) {
        nn::Tape tape(&store);
        const auto out = enc.encode(tape, rmtest::random_road_tokens(rng, n));
        ok = ok && out.rows() == cfg.descriptors && out.cols() == cfg.model_dim;
        shapes += "n=" + std::to_string(n) + "->" + out.value().shape_string() + " ";
    }
    return {ok, shapes + "(K=" + std::to_string(cfg.descriptors) + ")"};
}

// ---- 6 ---------------------------------------------------------------------
Outcome metric_oracles()
{
    std::mt19937_64 rng(6006);
    const std::vector<std::size_t> horizons{10, 20, 30};
    double worst = 0.0;
    bool presence_ok = true;
    for (int i = 0; i < 1000; ++i) {
        const auto pred = rmtest::random_prediction(rng, 30);
        const auto truth = rmtest::random_truth(rng, 30, 0.15);
        double ade_sum = 0.0, fde_sum = 0.0;
        std::size_t na = 0, nf = 0;
        for (std::size_t h : horizons) {
            const auto a = min_ade(pred, truth, h), ra = rmtest::ref_min_ade(pred, truth, h);
            const auto f = min_fde(pred, truth, h), rf = rmtest::ref_min_fde(pred, truth, h);
            presence_ok = presence_ok && a.has_value() == ra.has_value() && f.has_value() == rf.has_value();
            if (a && ra) worst = std::max(worst, std::abs(*a - *ra)), ade_sum += *ra, ++na;
            if (f && rf) worst = std::max(worst, std::abs(*f - *rf)), fde_sum += *rf, ++nf;
        }
        const auto avg = averaged_metrics(pred, truth, horizons);
        if (avg.min_ade && na) worst = std::max(worst, std::abs(*avg.min_ade - ade_sum / double(na)));
        if (avg.min_fde && nf) worst = std::max(worst, std::abs(*avg.min_fde - fde_sum / double(nf)));
        presence_ok = presence_ok && avg.min_ade.has_value() == (na > 0) && avg.min_fde.has_value() == (nf > 0);
    }
    const double d1 = delta_rel(0.697, 0.794);
    const double d2 = delta_rel(1.584, 1.865);
    const bool table_ok = std::abs(d1 + 12.22) <= 0.01 && std::abs(d2 + 15.07) <= 0.01;
    return {presence_ok && worst <= 1e-9 && table_ok,
            "max abs error " + fmt(worst) + " on 1000 cases (tol 1e-9); delta_rel " + fmt(d1, 6) + "% and " + fmt(d2, 6) +
                "% (targets -12.22, -15.07, tol 0.01 pp)"};
}

// ---- 7 ---------------------------------------------------------------------
Outcome confidence_simplex()
{
    const auto cfg = rmtest::tiny_model();
    data::SyntheticConfig scfg;
    scfg.future_steps = static_cast<int>(cfg.future_steps);
    double worst_sum = 0.0;
    double min_conf = 1.0;
    std::size_t passes = 0;
    const auto record = [&](const MotionPrediction& p) {
        double s = 0.0;
        for (double c : p.confidences) s += c, min_conf = std::min(min_conf, c);
        worst_sum = std::max(worst_sum, std::abs(s - 1.0));
        ++passes;
    };
    for (std::uint64_t block = 0; block < 10; ++block) {
        // Fresh weights every 100 passes.
        nn::ParameterStore store(data::derive_seed(707, block));
        RedMotion red(store, cfg);
        MotionVit vit(store, cfg);
        DualMotionVit dual(store, cfg);
        for (std::uint64_t i = 0; i < 100; ++i) {
            const RoadScene scene = to_ego_frame(data::generate_synthetic_scene(scfg, data::derive_seed(block, i)),
                                                 data::generate_synthetic_scene(scfg, data::derive_seed(block, i)).ego_id);
            record(redmotion_forward(red, store, scene, scene.ego_id));
            const RasterImage img = rasterize(scene);
            nn::Tape tape(&store);
            record(to_prediction(vit.forward(tape, img)));
            record(to_prediction(dual.forward(tape, map_channels(img), agent_channels(img))));
        }
    }
    return {min_conf >= 0.0 && worst_sum <= 1e-6,
            std::to_string(passes) + " passes (1000 per model), min confidence " + fmt(min_conf) + ", max |sum - 1| " +
                fmt(worst_sum) + " (tol 1e-6)"};
}

// ---- 8 ---------------------------------------------------------------------
Outcome overfit()
{
    data::SyntheticConfig scfg;
    scfg.future_steps = 10;
    std::vector<RoadScene> scenes;
    for (std::uint64_t i = 0; i < 8; ++i) scenes.push_back(data::generate_synthetic_scene(scfg, data::derive_seed(808, i)));
    const Datasets data{scenes, scenes};

    RunConfig cfg;
    cfg.mode = RunMode::finetune;
    cfg.model_config.model_dim = 32;
    cfg.model_config.heads = 4;
    cfg.model_config.local_blocks = 2;
    cfg.model_config.descriptors = 4;
    cfg.model_config.future_steps = 10;
    cfg.model_config.head_hidden = 64;
    cfg.model_config.projector = {64, 64, 64};
    cfg.horizons = {10};
    cfg.batch_size = 8;
    cfg.steps = 500;
    cfg.lr_init = 3e-3;
    cfg.lr_final = 1e-5;
    cfg.optimizer.weight_decay = 0.0;
    cfg.validate_every = 0;
    cfg.validation_scenes = 8;

    int wins = 0;
    std::string detail;
    for (std::uint64_t seed : {0u, 1u, 2u}) {
        cfg.seed = seed;
        const RunResult r = run_finetune(cfg, data);
        const double nll = r.final_train_nll.value_or(1e9);
        wins += nll < 0.5;
        detail += "seed " + std::to_string(seed) + ": " + fmt(nll) + "  ";
    }
    return {wins >= 2, "final training NLL after 500 steps on 8 scenes: " + detail + "(need < 0.5 on >= 2 of 3)"};
}

// ---- 9 and 10 share the scaled protocol ---------------------------------------
struct Scaled {
    Datasets data;
    RunConfig base;
};

const Scaled& scaled_setup()
{
    static const Scaled s = [] {
        Scaled out;
        data::SyntheticConfig scfg;
        for (std::uint64_t i = 0; i < 2000; ++i) out.data.train.push_back(data::generate_synthetic_scene(scfg, data::derive_seed(100, i)));
        for (std::uint64_t i = 0; i < 200; ++i) out.data.holdout.push_back(data::generate_synthetic_scene(scfg, data::derive_seed(200, i)));
        RunConfig& c = out.base;
        c.model_config.model_dim = 32;
        c.model_config.heads = 4;
        c.model_config.local_blocks = 2;
        c.model_config.descriptors = 8;
        c.model_config.projector = {128, 128, 128};
        c.model_config.head_hidden = 64;
        c.batch_size = 16;
        c.lr_init = 1e-3;
        c.lr_final = 1e-5;
        c.validate_every = 0;
        c.validation_scenes = 200;
        c.fds = 0.125;
        c.steps = 400;
        return out;
    }();
    return s;
}

double holdout_min_fde(const RunConfig& cfg, const nn::Checkpoint& ckpt, std::span<const RoadScene> holdout)
{
    RunConfig e = cfg;
    e.mode = RunMode::eval;
    return run_eval(e, ckpt, holdout).report.overall.avg_min_fde.value_or(1e9);
}

// Scratch fine-tuning is shared by both criteria.
const RunResult& scratch_run(std::uint64_t seed)
{
    static std::map<std::uint64_t, RunResult> cache;
    auto it = cache.find(seed);
    if (it == cache.end()) {
        RunConfig c = scaled_setup().base;
        c.mode = RunMode::finetune;
        c.seed = seed;
        it = cache.emplace(seed, run_finetune(c, scaled_setup().data)).first;
    }
    return it->second;
}

Outcome semi_supervised()
{
    const auto& s = scaled_setup();
    int wins = 0;
    std::string detail;
    for (std::uint64_t seed : {0u, 1u, 2u}) {
        RunConfig pre = s.base;
        pre.mode = RunMode::pretrain_rbt;
        pre.strip_agents = true;
        // Same budget as fine-tuning.
        pre.steps = s.base.steps;
        pre.seed = seed;
        const RunResult p = run_pretrain(pre, s.data);

        RunConfig ft = s.base;
        ft.mode = RunMode::finetune;
        ft.seed = seed;
        const RunResult tuned = run_finetune(ft, s.data, &p.checkpoint);
        const double fde_pre = holdout_min_fde(ft, tuned.checkpoint, s.data.holdout);
        const double fde_base = holdout_min_fde(ft, scratch_run(seed).checkpoint, s.data.holdout);
        wins += fde_pre <= fde_base;
        detail += "seed " + std::to_string(seed) + ": " + fmt(fde_pre) + " vs " + fmt(fde_base) + " (" +
                  fmt(delta_rel(fde_pre, fde_base), 3) + "%)  ";
    }
    return {wins >= 2, "holdout minFDE RBT-pretrained vs scratch at fds 0.125, delta_rel: " + detail +
                           "(need pretrained <= scratch on >= 2 of 3)"};
}

// Chosen on tuning seeds 10-12, disjoint from the acceptance seeds.
constexpr double kAuxBeta = 0.1;

double mean_step_ms(const RunResult& r)
{
    double total = 0.0;
    for (const auto& rec : r.log.records()) total += rec.time_ms;
    return total / double(std::max<std::size_t>(1, r.log.records().size()));
}

Outcome aux_regularization()
{
    const auto& s = scaled_setup();
    double step_ratio = 0.0;
    int wins = 0;
    std::string detail;
    for (std::uint64_t seed : {0u, 1u, 2u}) {
        RunConfig joint = s.base;
        joint.mode = RunMode::joint_rbt_aux;
        joint.seed = seed;
        joint.loss.aux_beta = kAuxBeta;
        const RunResult aux = run_joint_aux(joint, s.data);
        const RunResult& base = scratch_run(seed);
        const double gap_aux = aux.final_val_nll.value_or(1e9) - aux.final_train_nll.value_or(0.0);
        const double gap_base = base.final_val_nll.value_or(1e9) - base.final_train_nll.value_or(0.0);
        wins += gap_aux <= gap_base;
        step_ratio = std::max(step_ratio, mean_step_ms(aux) / mean_step_ms(base));
        detail += "seed " + std::to_string(seed) + ": " + fmt(gap_aux) + " vs " + fmt(gap_base) + "  ";
    }
    return {wins >= 2, "(validation - training) NLL gap with aux loss (beta " + fmt(kAuxBeta) + ") vs without: " + detail +
                           "(expected: the auxiliary twin loss narrows the gap; need <= on >= 2 of 3); per-step time ratio " +
                           fmt(step_ratio, 3) + " (bound 2.5)"};
}

// ---- 11 --------------------------------------------------------------------
Outcome determinism()
{
    const Datasets data{rmtest::tiny_scenes(10, 1100), rmtest::tiny_scenes(4, 1101)};
    auto cfg = rmtest::tiny_run(RunMode::finetune);
    const RunResult a = run_finetune(cfg, data);
    const RunResult b = run_finetune(cfg, data);
    const bool same_digest = a.parameter_digest == b.parameter_digest;

    auto pre = rmtest::tiny_run(RunMode::pretrain_rbt);
    pre.strip_agents = true;
    const bool same_pre = run_pretrain(pre, data).parameter_digest == run_pretrain(pre, data).parameter_digest;

    const auto dir = std::filesystem::temp_directory_path() / "rm_acceptance";
    std::filesystem::create_directories(dir);
    nn::save_checkpoint(a.checkpoint, dir / "c.rmck");
    nn::ParameterStore s1(0), s2(0);
    RedMotion m1(s1, cfg.model_config), m2(s2, cfg.model_config);
    nn::load_into(s1, a.checkpoint, true);
    nn::load_into(s2, nn::load_checkpoint(dir / "c.rmck"), true);
    bool same_forward = true;
    for (const auto& scene : data.holdout)
        same_forward = same_forward && redmotion_forward(m1, s1, scene, scene.ego_id) == redmotion_forward(m2, s2, scene, scene.ego_id);

    std::vector<RoadScene> scenes = data.train;
    scenes.push_back(data::strip_agents(scenes.front()));
    data::save_scenarios(scenes, dir / "s.jsonl");
    const bool same_scenes = data::load_scenarios(dir / "s.jsonl") == scenes;
    std::filesystem::remove_all(dir);
    return {same_digest && same_pre && same_forward && same_scenes,
            std::string("finetune digests ") + (same_digest ? "equal" : "DIFFER") + ", pretrain digests " +
                (same_pre ? "equal" : "DIFFER") + ", checkpoint forward " + (same_forward ? "bit-identical" : "DIFFERS") +
                ", scenario file " + (same_scenes ? "exact" : "DIFFERS")};
}

// ---- 12 --------------------------------------------------------------------
Outcome fusion_cost()
{
    nn::ParameterStore store(12);
    DualMotionVit dual(store, rmtest::tiny_model());
    const auto scene = rmtest::tiny_scenes(1, 1200).front();
    const RasterImage img = rasterize(to_ego_frame(scene, scene.ego_id));
    nn::Tape tape(&store);
    nn::AttentionProbe probe;
    dual.forward(tape, map_channels(img), agent_channels(img), &probe);
    return {probe.logits_computed == kPatchCount,
            "fusion attention logits " + std::to_string(probe.logits_computed) + " (map tokens " + std::to_string(kPatchCount) + ")"};
}

struct Criterion {
    int id;
    const char* name;
    double budget_s;  // 0 = no runtime bound
    std::function<Outcome()> run;
    bool advisory = false;  // reported, but does not affect the exit status
};

}  // namespace

int main(int argc, char** argv)
{
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    std::size_t warnings = 0;
    set_warning_sink([&](const std::string&) { ++warnings; });

    const std::vector<Criterion> criteria{
        {1, "loss oracle equivalence", 10, loss_oracles},
        {2, "gradient suite", 60, gradient_suite},
        {3, "local attention equivalence", 30, local_attention},
        {4, "receptive field", 0, receptive_field},
        {5, "fixed-size descriptors", 0, fixed_size_red},
        {6, "metric oracle equivalence", 0, metric_oracles},
        {7, "confidence simplex", 0, confidence_simplex},
        {8, "overfit smoke test", 300, overfit},
        {9, "scaled semi-supervised protocol", 1800, semi_supervised},
        {10, "auxiliary-loss regularization", 0, aux_regularization, true},
        {11, "determinism and persistence", 0, determinism},
        {12, "dual encoder fusion cost", 0, fusion_cost},
    };

    int failures = 0;
    int advisory_failures = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && !selected.contains(c.id)) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = seconds_since(t0);
        std::string timing = fmt(secs, 3) + " s";
        if (c.budget_s > 0) {
            timing += " / budget " + fmt(c.budget_s, 4) + " s";
            if (secs > c.budget_s) {
                o.pass = false;
                timing += " EXCEEDED";
            }
        }
        if (!o.pass) ++(c.advisory ? advisory_failures : failures);
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << c.id << " " << c.name
                  << (c.advisory ? " (advisory, not counted in the exit status)" : "") << ": " << o.detail << " [" << timing
                  << "]" << std::endl;
    }
    if (warnings > 0) std::cout << "note: " << warnings << " library warning(s) suppressed during the run" << std::endl;
    std::cout << (failures == 0 ? "ALL REQUIRED CRITERIA PASS" : std::to_string(failures) + " REQUIRED CRITERION/CRITERIA FAILED");
    if (advisory_failures > 0) std::cout << "; " << advisory_failures << " advisory FAIL";
    std::cout << std::endl;
    return failures == 0 ? 0 : 1;
}
