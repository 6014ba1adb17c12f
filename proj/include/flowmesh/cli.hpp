#pragma once

// Batch pipeline front end. `run_command` is the whole CLI surface so tests
// can drive commands in-process; exit codes: 0 success, 2 invalid input or
// flags, 3 numerical failure.

#include "flowmesh/core.hpp"
#include "flowmesh/fields.hpp"
#include "flowmesh/fit.hpp"
#include "flowmesh/io.hpp"
#include "flowmesh/losses.hpp"
#include "flowmesh/metrics.hpp"
#include "flowmesh/network.hpp"
#include "flowmesh/synth.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace flowmesh {

namespace clidetail {

inline std::uint64_t env_seed_fallback(std::uint64_t value, bool provided) {
    if (provided) return value;
    if (const char* env = std::getenv("FLOWMESH_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            fail(errc::bad_argument, std::string("FLOWMESH_SEED is not a number: ") + env);
        }
    }
    return value;
}

inline LossWeights parse_lambdas(const std::string& csv) {
    if (csv.empty()) return LossWeights{};
    std::vector<double> vals;
    std::istringstream in(csv);
    std::string cell;
    while (std::getline(in, cell, ',')) {
        try {
            vals.push_back(std::stod(cell));
        } catch (const std::exception&) {
            fail(errc::bad_argument, "bad lambda value '" + cell + "'");
        }
    }
    require(vals.size() == 5, errc::bad_argument, "--lambdas expects 5 comma-separated values");
    LossWeights w{vals[0], vals[1], vals[2], vals[3], vals[4]};
    w.validate();
    return w;
}

// Fields must reach the loss evaluator in normalized space. Raw fields are
// normalized with the provided stats; without stats they are ignored (the
// CFD term stays off), so geometry-only workflows need no stats file.
inline std::optional<NodeFields> normalized_fields(const MeshWithFields& m,
                                                   const std::optional<NormStats>& stats,
                                                   const std::string& what) {
    (void)what;
    if (!m.fields) return std::nullopt;
    if (m.fields->space == FieldSpace::normalized) return *m.fields;
    if (!stats) return std::nullopt;
    return normalize_fields(*m.fields, *stats);
}

inline ordered_json bland_altman_json(const BlandAltmanResult& ba) {
    return ordered_json{{"bias", ba.bias}, {"loa_low", ba.loa_low}, {"loa_high", ba.loa_high}};
}

inline void write_phantom_bundle(const PhantomBundle& bundle, const fs::path& dir) {
    fs::create_directories(dir);
    save_mesh(dir / "mesh.json", bundle.mesh, &bundle.fields);
    save_image(dir / "image.json", bundle.image);
    save_stats(dir / "stats.json", bundle.stats);
    ordered_json manifest;
    manifest["format_version"] = kFormatVersion;
    manifest["report_type"] = "phantom_manifest";
    ordered_json spec;
    spec["kind"] = bundle.spec.kind;
    spec["radius_mm"] = bundle.spec.radius_mm;
    spec["length_mm"] = bundle.spec.length_mm;
    spec["branch_angle_deg"] = bundle.spec.branch_angle_deg;
    spec["target_nodes"] = bundle.spec.target_nodes;
    spec["mean_velocity_m_s"] = bundle.spec.mean_velocity;
    spec["axial_divisions"] = bundle.spec.axial_divisions;
    spec["radial_divisions"] = bundle.spec.radial_divisions;
    spec["angular_divisions"] = bundle.spec.angular_divisions;
    spec["seed"] = bundle.spec.seed;
    manifest["spec"] = std::move(spec);
    manifest["fluid"] = {{"density_kg_m3", kBloodDensity}, {"viscosity_pa_s", kBloodViscosity}};
    manifest["inlet_pressure_pa"] = bundle.inlet_pressure_pa;
    ordered_json derived;
    derived["nodes"] = bundle.mesh.node_count();
    derived["tets"] = bundle.mesh.cell_count();
    derived["edges"] = bundle.mesh.edges().size();
    derived["surface_triangles"] = bundle.mesh.surface_triangles().size();
    ordered_json cap_faces;
    for (const auto& cap : bundle.mesh.caps()) cap_faces[cap.name] = cap.faces.size();
    derived["cap_faces"] = std::move(cap_faces);
    derived["image_dims"] = {bundle.image.nx, bundle.image.ny, bundle.image.nz};
    derived["image_spacing_mm"] = bundle.image.spacing[0];
    manifest["derived"] = std::move(derived);
    ordered_json files;
    files["mesh"] = "mesh.json";
    files["image"] = "image.json";
    files["stats"] = "stats.json";
    ordered_json lines = ordered_json::array();
    for (const auto& cl : bundle.centerlines) {
        std::string label = cl.label;
        for (auto& ch : label) ch = char(std::tolower(ch));
        const std::string fname = "centerline_" + label + ".json";
        save_centerline(dir / fname, cl);
        lines.push_back(fname);
    }
    files["centerlines"] = std::move(lines);
    manifest["files"] = std::move(files);
    save_json(dir / "manifest.json", manifest);
}

// ---------------------------------------------------------------------------
// Subcommand bodies.

struct SynthArgs {
    PhantomSpec spec;
    double perturb_amplitude = 0.0;
    std::uint64_t perturb_seed = 1;
    std::string out;
    bool seed_given = false;
};

inline void cmd_synth(const SynthArgs& args) {
    PhantomSpec spec = args.spec;
    spec.seed = env_seed_fallback(spec.seed, args.seed_given);
    PhantomBundle bundle = generate_phantom(spec);
    if (args.perturb_amplitude > 0.0)
        bundle = perturb_phantom(bundle, args.perturb_amplitude, args.perturb_seed);
    write_phantom_bundle(bundle, args.out);
}

struct FitArgs {
    std::string template_path, target_path, out_path, trace_path, stats_path;
    FitConfig config;
    std::string lambdas;
};

inline void cmd_fit(const FitArgs& args) {
    const MeshWithFields tmpl = load_mesh(args.template_path);
    const MeshWithFields target = load_mesh(args.target_path);
    FitConfig config = args.config;
    config.weights = parse_lambdas(args.lambdas);

    std::optional<NormStats> stats;
    if (!args.stats_path.empty()) stats = load_stats(args.stats_path);
    const std::optional<NodeFields> target_fields =
        normalized_fields(target, stats, "fit target");

    const FitResult result = fit_template(tmpl.mesh, target.mesh,
                                          target_fields ? &*target_fields : nullptr, config);
    save_mesh(args.out_path, result.mesh,
              result.fields.node_count() > 0 ? &result.fields : nullptr);
    if (!args.trace_path.empty()) write_text_file(args.trace_path, trace_csv(result.trace));
}

inline void cmd_average(const std::vector<std::string>& inputs, const std::string& out) {
    std::vector<MeshWithFields> loaded;
    loaded.reserve(inputs.size());
    for (const auto& path : inputs) loaded.push_back(load_mesh(path));
    std::vector<const VolumeMesh*> meshes;
    for (const auto& m : loaded) meshes.push_back(&m.mesh);
    const VolumeMesh mean = average_correspondent_meshes(meshes);
    save_mesh(out, mean);
}

struct LossArgs {
    std::string pred_path, truth_path, template_path, stats_path, report_path;
    std::string lambdas;
};

inline void cmd_loss(const LossArgs& args) {
    const MeshWithFields pred = load_mesh(args.pred_path);
    const MeshWithFields truth = load_mesh(args.truth_path);
    const MeshWithFields tmpl = load_mesh(args.template_path);
    const LossWeights weights = parse_lambdas(args.lambdas);

    std::optional<NormStats> stats;
    if (!args.stats_path.empty()) stats = load_stats(args.stats_path);
    const std::optional<NodeFields> pred_fields = normalized_fields(pred, stats, "prediction");
    const std::optional<NodeFields> truth_fields = normalized_fields(truth, stats, "ground truth");

    const LossReport rep = mesh_loss(pred.mesh, pred_fields ? &*pred_fields : nullptr, truth.mesh,
                                     truth_fields ? &*truth_fields : nullptr, tmpl.mesh, weights,
                                     false);
    ordered_json j;
    j["format_version"] = kFormatVersion;
    j["report_type"] = "loss";
    j["terms"] = {{"point", rep.point},
                  {"point_surface", rep.point_surface},
                  {"edge", rep.edge},
                  {"edge_surface", rep.edge_surface},
                  {"aspect", rep.aspect},
                  {"cap", rep.cap},
                  {"cfd", rep.cfd}};
    j["weights"] = {{"lambda1", weights.lambda1},
                    {"lambda2", weights.lambda2},
                    {"lambda3", weights.lambda3},
                    {"lambda4", weights.lambda4},
                    {"lambda5", weights.lambda5}};
    j["has_cfd"] = rep.has_cfd;
    j["mesh"] = rep.mesh;
    save_json(args.report_path, j);
}

struct InferArgs {
    std::string image_path, template_path, weights_path, stats_path, out_path;
    std::string save_weights_path, branches_prefix;
    bool init_random = false;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

inline void cmd_infer(const InferArgs& args) {
    require(args.init_random != !args.weights_path.empty(), errc::bad_argument,
            "pass exactly one of --weights or --init-random");
    const ImageVolume image = load_image(args.image_path);
    const MeshWithFields tmpl = load_mesh(args.template_path);

    WeightSet weights;
    if (args.init_random) {
        weights = WeightSet::random(env_seed_fallback(args.seed, args.seed_given));
    } else {
        weights = load_weights(args.weights_path);
    }
    if (!args.save_weights_path.empty()) save_weights(args.save_weights_path, weights);

    std::optional<NormStats> stats;
    if (!args.stats_path.empty()) stats = load_stats(args.stats_path);
    const std::optional<NodeFields> template_fields =
        normalized_fields(tmpl, stats, "template");

    const std::vector<Image2FlowOutput> outputs = image2flow_forward(
        image, tmpl.mesh, template_fields ? &*template_fields : nullptr, weights);

    auto emit = [&](const Image2FlowOutput& out, const fs::path& path) {
        if (stats) {
            const NodeFields raw = denormalize_fields(out.fields, *stats);
            save_mesh(path, out.mesh, &raw);
        } else {
            save_mesh(path, out.mesh, &out.fields);
        }
    };
    if (!args.branches_prefix.empty()) {
        for (std::size_t b = 0; b < outputs.size(); ++b)
            emit(outputs[b], args.branches_prefix + ".branch" + std::to_string(b + 1) + ".json");
    }
    emit(outputs.back(), args.out_path);
}

struct TransferArgs {
    std::string src_path, dst_path, out_path, report_path;
};

inline void cmd_transfer(const TransferArgs& args) {
    const MeshWithFields src = load_mesh(args.src_path);
    const MeshWithFields dst = load_mesh(args.dst_path);
    require(src.fields.has_value(), errc::empty_source,
            "transfer source mesh carries no point_data");
    const TransferResult result =
        transfer_fields(src.mesh, *src.fields, dst.mesh.vertices());
    save_mesh(args.out_path, dst.mesh, &result.fields);
    if (!args.report_path.empty()) {
        ordered_json j;
        j["format_version"] = kFormatVersion;
        j["report_type"] = "transfer";
        j["points"] = dst.mesh.node_count();
        j["extrapolated"] = result.extrapolated;
        save_json(args.report_path, j);
    }
}

struct EvalSegArgs {
    std::string pred_path, truth_path, report_path;
    double spacing = 1.0;
};

inline void cmd_eval_seg(const EvalSegArgs& args) {
    require(args.spacing > 0.0, errc::bad_argument, "--spacing must be > 0");
    const MeshWithFields pred = load_mesh(args.pred_path);
    const MeshWithFields truth = load_mesh(args.truth_path);

    Aabb box;
    for (const auto& v : pred.mesh.vertices()) box.expand(v);
    for (const auto& v : truth.mesh.vertices()) box.expand(v);
    GridSpec grid;
    grid.spacing = Vec3::Constant(args.spacing);
    grid.origin = box.lo - grid.spacing;
    for (int k = 0; k < 3; ++k)
        grid.dims[k] = int(std::ceil((box.hi[k] - box.lo[k]) / args.spacing)) + 3;

    const VoxelMask mask_pred = voxelize(pred.mesh, grid);
    const VoxelMask mask_truth = voxelize(truth.mesh, grid);
    const double dice_score = dice(mask_pred, mask_truth);
    const SurfaceDistanceResult sd = surface_distances(pred.mesh, truth.mesh);

    ordered_json j;
    j["format_version"] = kFormatVersion;
    j["report_type"] = "segmentation";
    j["dice"] = dice_score;
    j["assd_mm"] = sd.assd;
    j["hd_mm"] = sd.hd;
    j["grid"] = {{"dims", grid.dims}, {"spacing_mm", args.spacing}};
    save_json(args.report_path, j);
}

struct EvalCfdArgs {
    std::string pred_path, truth_path, report_path;
};

inline void cmd_eval_cfd(const EvalCfdArgs& args) {
    const MeshWithFields pred = load_mesh(args.pred_path);
    const MeshWithFields truth = load_mesh(args.truth_path);
    require(pred.fields && truth.fields, errc::bad_argument,
            "eval-cfd needs point_data on both meshes");
    require(pred.fields->space == FieldSpace::raw && truth.fields->space == FieldSpace::raw,
            errc::wrong_space, "eval-cfd expects raw-space fields");

    const NodeErrorResult errors = node_errors(*pred.fields, *truth.fields);
    const auto pred_ch = detail::field_channels(*pred.fields);
    const auto truth_ch = detail::field_channels(*truth.fields);

    ordered_json channels;
    for (int c = 0; c < kErrorChannels; ++c) {
        ordered_json jc;
        jc["mnae_s_percent"] = errors.mnae_s[c];
        jc["rmse"] = errors.rmse[c];
        jc["bland_altman"] = bland_altman_json(bland_altman(pred_ch[c], truth_ch[c]));
        channels[kErrorChannelNames[c]] = std::move(jc);
    }
    ordered_json j;
    j["format_version"] = kFormatVersion;
    j["report_type"] = "cfd";
    j["nodes"] = pred.fields->node_count();
    j["channels"] = std::move(channels);
    save_json(args.report_path, j);
}

struct ProfileArgs {
    std::string mesh_path, centerline_path, out_path;
    int resample = 100;
    int k = 5;
};

inline void cmd_profile(const ProfileArgs& args) {
    const MeshWithFields mesh = load_mesh(args.mesh_path);
    require(mesh.fields.has_value(), errc::bad_argument, "profile mesh carries no point_data");
    const Centerline line = load_centerline(args.centerline_path);
    const Centerline resampled = resample_centerline(line, args.resample);
    const std::vector<ProfileSample> profile =
        centerline_profile(mesh.mesh, *mesh.fields, resampled, args.k);
    write_text_file(args.out_path, profile_csv(profile));
}

struct FrechetArgs {
    std::string a_path, b_path, report_path;
    std::string channel = "pressure";
    double normalize_range = 0.0;
    bool normalize_given = false;
};

inline void cmd_frechet(const FrechetArgs& args) {
    require(args.channel == "pressure" || args.channel == "velocity_magnitude",
            errc::bad_argument, "--channel must be pressure or velocity_magnitude");
    const auto profile_a = parse_profile_csv(read_text_file(args.a_path), "'" + args.a_path + "'");
    const auto profile_b = parse_profile_csv(read_text_file(args.b_path), "'" + args.b_path + "'");
    const bool vel = args.channel == "velocity_magnitude";
    const auto curve_a = profile_curve(profile_a, vel);
    const auto curve_b = profile_curve(profile_b, vel);

    ordered_json j;
    j["format_version"] = kFormatVersion;
    j["report_type"] = "frechet";
    j["channel"] = args.channel;
    j["fd"] = frechet_distance(curve_a, curve_b);
    if (args.normalize_given)
        j["fd_norm_percent"] = frechet_normalized(curve_a, curve_b, args.normalize_range);
    if (args.report_path.empty()) {
        std::cout << j.dump(2) << std::endl;
    } else {
        save_json(args.report_path, j);
    }
}

}  // namespace clidetail

// ---------------------------------------------------------------------------

inline int run_command(const std::vector<std::string>& args) {
    using namespace clidetail;
    CLI::App app{"flowmesh: template-mesh deformation, hybrid image/graph inference, "
                 "field transfer and CFD evaluation on tetrahedral vessel meshes"};
    app.require_subcommand(1);
    int threads = 1;
    app.add_option("--threads", threads, "worker threads (results are identical for any value)");

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "generate an analytic phantom bundle");
    s->add_option("--kind", synth.spec.kind, "straight | bifurcation");
    s->add_option("--radius", synth.spec.radius_mm, "vessel radius (mm)");
    s->add_option("--length", synth.spec.length_mm, "vessel length (mm)");
    s->add_option("--angle", synth.spec.branch_angle_deg, "branch angle (deg)");
    s->add_option("--nodes", synth.spec.target_nodes, "target node count");
    s->add_option("--vmean", synth.spec.mean_velocity, "mean inlet velocity (m/s)");
    s->add_option("--axial", synth.spec.axial_divisions, "axial divisions (0 = derive)");
    s->add_option("--radial", synth.spec.radial_divisions, "radial divisions (0 = derive)");
    s->add_option("--angular", synth.spec.angular_divisions, "angular divisions (0 = derive)");
    auto* synth_seed = s->add_option("--seed", synth.spec.seed, "jitter seed (0 = no jitter)");
    s->add_option("--image-size", synth.spec.image_size, "cubic image side (0 = derive)");
    s->add_option("--image-spacing", synth.spec.image_spacing, "image spacing mm (0 = derive)");
    s->add_option("--perturb-amplitude", synth.perturb_amplitude,
                  "radial perturbation amplitude (mm)");
    s->add_option("--perturb-seed", synth.perturb_seed, "perturbation seed");
    s->add_option("--out", synth.out, "output directory")->required();

    FitArgs fit;
    auto* f = app.add_subcommand("fit", "deform a template mesh onto a target");
    f->add_option("--template", fit.template_path, "template mesh JSON")->required();
    f->add_option("--target", fit.target_path, "target mesh JSON")->required();
    f->add_option("--out", fit.out_path, "fitted mesh JSON")->required();
    f->add_option("--trace", fit.trace_path, "per-iteration loss CSV");
    f->add_option("--stats", fit.stats_path, "normalization stats JSON (enables CFD term)");
    f->add_option("--iters", fit.config.max_iters, "max iterations");
    f->add_option("--step", fit.config.step_size, "step size (mm)");
    f->add_option("--beta1", fit.config.beta_momentum, "momentum decay");
    f->add_option("--beta2", fit.config.beta_variance, "variance decay");
    f->add_option("--eps", fit.config.eps_stability, "stability epsilon");
    f->add_option("--tol", fit.config.tolerance, "relative smoothed-loss tolerance");
    f->add_option("--lambdas", fit.lambdas, "loss weights 'l1,l2,l3,l4,l5'");
    f->add_option("--seed", fit.config.seed, "seed (reserved)");

    std::vector<std::string> average_inputs;
    std::string average_out;
    auto* av = app.add_subcommand("average", "average point-correspondent meshes");
    av->add_option("--inputs", average_inputs, "input meshes")->required()->expected(-1);
    av->add_option("--out", average_out, "output mesh JSON")->required();

    LossArgs loss;
    auto* lo = app.add_subcommand("loss", "evaluate the combined mesh loss");
    lo->add_option("--pred", loss.pred_path, "predicted mesh JSON")->required();
    lo->add_option("--truth", loss.truth_path, "ground-truth mesh JSON")->required();
    lo->add_option("--template", loss.template_path, "template mesh JSON")->required();
    lo->add_option("--lambdas", loss.lambdas, "loss weights 'l1,l2,l3,l4,l5'");
    lo->add_option("--stats", loss.stats_path, "normalization stats JSON");
    lo->add_option("--report", loss.report_path, "report JSON")->required();

    InferArgs infer;
    auto* in = app.add_subcommand("infer", "run the forward pass");
    in->add_option("--image", infer.image_path, "image sidecar JSON")->required();
    in->add_option("--template", infer.template_path, "template mesh JSON")->required();
    in->add_option("--weights", infer.weights_path, "weight manifest JSON");
    in->add_flag("--init-random", infer.init_random, "use seeded random weights");
    auto* infer_seed = in->add_option("--seed", infer.seed, "random-weight seed");
    in->add_option("--stats", infer.stats_path, "normalization stats JSON");
    in->add_option("--out", infer.out_path, "output mesh JSON")->required();
    in->add_option("--save-weights", infer.save_weights_path, "also write the weight set here");
    in->add_option("--branches", infer.branches_prefix, "also write per-branch outputs");

    TransferArgs transfer;
    auto* tr = app.add_subcommand("transfer", "barycentric field transfer between meshes");
    tr->add_option("--src", transfer.src_path, "source mesh with point_data")->required();
    tr->add_option("--dst", transfer.dst_path, "destination mesh")->required();
    tr->add_option("--out", transfer.out_path, "destination mesh with fields")->required();
    tr->add_option("--report", transfer.report_path, "transfer report JSON");

    EvalSegArgs seg;
    auto* es = app.add_subcommand("eval-seg", "segmentation metrics (Dice, ASSD, HD)");
    es->add_option("--pred", seg.pred_path, "predicted mesh JSON")->required();
    es->add_option("--truth", seg.truth_path, "ground-truth mesh JSON")->required();
    es->add_option("--spacing", seg.spacing, "voxel spacing (mm)");
    es->add_option("--report", seg.report_path, "report JSON")->required();

    EvalCfdArgs cfd;
    auto* ec = app.add_subcommand("eval-cfd", "node-wise CFD error metrics");
    ec->add_option("--pred", cfd.pred_path, "predicted mesh with point_data")->required();
    ec->add_option("--truth", cfd.truth_path, "ground-truth mesh with point_data")->required();
    ec->add_option("--report", cfd.report_path, "report JSON")->required();

    ProfileArgs profile;
    auto* pr = app.add_subcommand("profile", "centerline pressure/velocity profile");
    pr->add_option("--mesh", profile.mesh_path, "mesh with point_data")->required();
    pr->add_option("--centerline", profile.centerline_path, "centerline JSON")->required();
    pr->add_option("--resample", profile.resample, "resampled point count");
    pr->add_option("--k", profile.k, "nearest nodes per sample");
    pr->add_option("--out", profile.out_path, "profile CSV")->required();

    FrechetArgs frechet;
    auto* fr = app.add_subcommand("frechet", "discrete Frechet distance between profiles");
    fr->add_option("--a", frechet.a_path, "profile CSV")->required();
    fr->add_option("--b", frechet.b_path, "profile CSV")->required();
    fr->add_option("--channel", frechet.channel, "pressure | velocity_magnitude");
    auto* norm_opt = fr->add_option("--normalize-range", frechet.normalize_range,
                                    "truth-channel range for FD_norm");
    fr->add_option("--report", frechet.report_path, "report JSON (stdout when omitted)");

    std::string vtk_in, vtk_out;
    auto* cv = app.add_subcommand("convert", "import a legacy ASCII VTK unstructured grid");
    cv->add_option("--from-vtk", vtk_in, "input .vtk file")->required();
    cv->add_option("--out", vtk_out, "output mesh JSON")->required();

    std::vector<const char*> argv;
    argv.push_back("flowmesh");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(int(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help() << std::endl;
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    }

    set_thread_count(threads);
    synth.seed_given = synth_seed->count() > 0;
    infer.seed_given = infer_seed->count() > 0;
    frechet.normalize_given = norm_opt->count() > 0;

    try {
        if (s->parsed()) cmd_synth(synth);
        else if (f->parsed()) cmd_fit(fit);
        else if (av->parsed()) cmd_average(average_inputs, average_out);
        else if (lo->parsed()) cmd_loss(loss);
        else if (in->parsed()) cmd_infer(infer);
        else if (tr->parsed()) cmd_transfer(transfer);
        else if (es->parsed()) cmd_eval_seg(seg);
        else if (ec->parsed()) cmd_eval_cfd(cfd);
        else if (pr->parsed()) cmd_profile(profile);
        else if (fr->parsed()) cmd_frechet(frechet);
        else if (cv->parsed()) {
            const MeshWithFields mesh = import_vtk(vtk_in);
            save_mesh(vtk_out, mesh.mesh);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return is_numeric_failure(e.code()) ? 3 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    }
    return 0;
}

}  // namespace flowmesh
