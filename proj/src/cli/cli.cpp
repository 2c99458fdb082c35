#include "ivanet/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <ostream>

#include "ivanet/checkpoint.hpp"
#include "ivanet/config.hpp"
#include "ivanet/gradient_suite.hpp"

namespace ivanet {

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GenDataArgs {
    std::string out;
    std::size_t num = 0;
    std::size_t size = 64;
    std::size_t classes = 4;
    std::uint64_t seed = 0;
};

struct TrainArgs {
    std::string data, config, mode, out, log;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> steps;
};

struct EvalArgs {
    std::string data, ckpt;
};

struct InferArgs {
    std::string image, ckpt, out_boxes, out_mask;
};

RunConfig checkpoint_config(const Checkpoint& ckpt, const std::string& source) {
    return parse_run_config(ckpt.config, source + " (embedded config)");
}

int gen_data(const GenDataArgs& a, std::ostream& out) {
    if (a.num == 0) throw UsageError("--num must be positive");
    generate_shapes_dataset(a.num, a.size, a.classes, a.seed, a.out);
    out << "wrote " << a.num << " images to " << a.out << '\n';
    return 0;
}

int train(const TrainArgs& a, std::ostream& out) {
    RunConfig cfg = a.config.empty() ? RunConfig{} : load_run_config(a.config);
    if (!a.mode.empty()) {
        try {
            cfg.train.mode = parse_mode(a.mode);
        } catch (const ConfigError& e) {
            throw UsageError(e.what());
        }
    }
    if (a.seed) cfg.train.seed = *a.seed;
    if (a.steps) cfg.train.max_steps = *a.steps;

    const Dataset data = load_dataset(a.data);
    if (data.image_size != cfg.model.backbone.input_size) {
        throw ConfigError("dataset image size " + std::to_string(data.image_size) + " does not match input_size " +
                          std::to_string(cfg.model.backbone.input_size));
    }
    if (data.num_classes != cfg.model.num_classes()) {
        throw ConfigError("dataset has " + std::to_string(data.num_classes) + " classes, config expects " +
                          std::to_string(cfg.model.num_classes()));
    }

    const std::size_t report_every = std::max<std::size_t>(1, cfg.train.max_steps / 20);
    const TrainResult result = train_loop(data.samples, cfg.model, cfg.train, [&](const LossRecord& r) {
        if ((r.step + 1) % report_every == 0) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "step %zu lr %.1e det %.4f seg %.4f total %.4f\n", r.step + 1, r.lr, r.det,
                          r.seg, r.total);
            out << buf << std::flush;
        }
    });

    Checkpoint ckpt{result.params, result.steps, format_run_config(cfg)};
    save_checkpoint(a.out, ckpt);
    const std::string log_path = a.log.empty() ? a.out + ".log" : a.log;
    write_file_atomic(log_path, format_loss_log(result.log));
    out << "checkpoint " << a.out << "\nloss log " << log_path << '\n';
    return 0;
}

int eval(const EvalArgs& a, std::ostream& out, const CliHooks& hooks) {
    const Checkpoint ckpt = load_checkpoint(a.ckpt);
    const RunConfig cfg = checkpoint_config(ckpt, a.ckpt);
    const Dataset data = load_dataset(a.data);
    if (data.num_classes != cfg.model.num_classes() || data.image_size != cfg.model.backbone.input_size) {
        throw ConfigError("dataset " + a.data + " does not match the checkpoint's classes or input size");
    }
    const Mode mode = cfg.train.mode;
    const Predictor predictor = hooks.make_predictor ? hooks.make_predictor(ckpt.tensors, cfg.model, mode)
                                                     : model_predictor(ckpt.tensors, cfg.model, mode);
    EvalOptions opts;
    opts.detection = uses_detection(mode);
    opts.segmentation = uses_segmentation(mode);
    out << format_report(evaluate(data.samples, data.num_classes, predictor, opts));
    return 0;
}

int infer(const InferArgs& a, std::ostream& out) {
    const Checkpoint ckpt = load_checkpoint(a.ckpt);
    const RunConfig cfg = checkpoint_config(ckpt, a.ckpt);
    const RasterImage raster = read_pnm(a.image);
    if (raster.channels != 3) throw InputError(a.image + ": expected an RGB (P6) image");
    const std::size_t s = cfg.model.backbone.input_size;
    if (raster.width != s || raster.height != s) {
        throw InputError(a.image + ": image is " + std::to_string(raster.width) + "x" + std::to_string(raster.height) +
                         ", model expects " + std::to_string(s) + "x" + std::to_string(s));
    }
    const Tensor image = image_to_tensor(raster).reshaped_value({1, 3, s, s});
    const Prediction p = predict(ckpt.tensors, cfg.model, image, cfg.train.mode).front();

    std::string boxes;
    char buf[160];
    for (const Detection& d : p.detections) {
        std::snprintf(buf, sizeof buf, "%d %.6f %.6f %.6f %.6f %.6f\n", d.class_id, d.score, d.box.xmin, d.box.ymin,
                      d.box.xmax, d.box.ymax);
        boxes += buf;
    }
    write_file_atomic(a.out_boxes, boxes);
    if (!p.mask.empty()) {
        write_pnm(a.out_mask, RasterImage{s, s, 1, p.mask});
    } else {
        out << "segmentation disabled in mode " << mode_name(cfg.train.mode) << "; no mask written\n";
    }
    out << p.detections.size() << " detections\n";
    return 0;
}

int gradcheck(std::ostream& out) {
    bool ok = true;
    char buf[64];
    for (const GradCheckResult& r : run_gradient_suite()) {
        std::snprintf(buf, sizeof buf, "%.3e", r.max_rel_error);
        const bool pass = r.max_rel_error < 1e-6;
        ok = ok && pass;
        out << r.name << '\t' << buf << '\t' << (pass ? "ok" : "FAIL") << '\n';
    }
    return ok ? 0 : 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const CliHooks& hooks) {
    CLI::App app{"IvaNet joint detection and segmentation", "ivanet"};
    app.require_subcommand(1);

    GenDataArgs g;
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic shapes dataset");
    gen->add_option("--out", g.out, "Output directory")->required();
    gen->add_option("--num", g.num, "Number of images")->required();
    gen->add_option("--size", g.size, "Image side in pixels");
    gen->add_option("--classes", g.classes, "Classes including background");
    gen->add_option("--seed", g.seed, "Random seed");

    TrainArgs t;
    auto* tr = app.add_subcommand("train", "Train a model");
    tr->add_option("--data", t.data, "Dataset directory")->required();
    tr->add_option("--config", t.config, "Config file (key = value)");
    tr->add_option("--mode", t.mode, "joint | det-only | seg-only | no-ltd");
    tr->add_option("--out", t.out, "Checkpoint path")->required();
    tr->add_option("--seed", t.seed, "Random seed (overrides config)");
    tr->add_option("--steps", t.steps, "Training steps (overrides config)");
    tr->add_option("--log", t.log, "Loss log path (default <out>.log)");

    EvalArgs e;
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
    ev->add_option("--data", e.data, "Dataset directory")->required();
    ev->add_option("--ckpt", e.ckpt, "Checkpoint path")->required();

    InferArgs i;
    auto* in = app.add_subcommand("infer", "Run a checkpoint on one image");
    in->add_option("--image", i.image, "Input PPM image")->required();
    in->add_option("--ckpt", i.ckpt, "Checkpoint path")->required();
    in->add_option("--out-boxes", i.out_boxes, "Detections output")->required();
    in->add_option("--out-mask", i.out_mask, "Mask output (PGM)")->required();

    auto* gc = app.add_subcommand("gradcheck", "Run the finite-difference gradient suite");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& ex) {
        err << "usage error: " << ex.what() << '\n';
        return 2;
    }

    try {
        if (gen->parsed()) return gen_data(g, out);
        if (tr->parsed()) return train(t, out);
        if (ev->parsed()) return eval(e, out, hooks);
        if (in->parsed()) return infer(i, out);
        if (gc->parsed()) return gradcheck(out);
    } catch (const UsageError& ex) {
        err << "usage error: " << ex.what() << '\n';
        return 2;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace ivanet
