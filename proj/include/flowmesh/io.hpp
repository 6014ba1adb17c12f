#pragma once

// File formats: JSON mesh documents (with optional point data), image
// sidecar + little-endian raw blobs, normalization stats, centerlines,
// weight manifests, CSV traces/profiles, and an import-only reader for
// legacy ASCII VTK unstructured grids.
//
// Serialization is canonical: fixed key order (ordered JSON), shortest
// round-trip float text, so identical inputs produce byte-identical files.

#include "flowmesh/core.hpp"
#include "flowmesh/fields.hpp"
#include "flowmesh/fit.hpp"
#include "flowmesh/image.hpp"
#include "flowmesh/mesh.hpp"
#include "flowmesh/metrics.hpp"
#include "flowmesh/network.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "raw blobs are little-endian; big-endian hosts are unsupported");

namespace flowmesh {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

inline constexpr int kFormatVersion = 1;

// ---------------------------------------------------------------------------
// Basic file helpers.

inline void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    require(bool(out), errc::io_error, "cannot open '" + path.string() + "' for writing");
    out << text;
    require(bool(out), errc::io_error, "failed writing '" + path.string() + "'");
}

inline std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(bool(in), errc::io_error, "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void save_json(const fs::path& path, const ordered_json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

inline ordered_json load_json(const fs::path& path) {
    try {
        return ordered_json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        fail(errc::io_error, "invalid JSON in '" + path.string() + "': " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Mesh documents.

struct MeshWithFields {
    VolumeMesh mesh;
    std::optional<NodeFields> fields;
};

inline ordered_json mesh_to_json(const VolumeMesh& mesh, const NodeFields* fields) {
    ordered_json j;
    j["format_version"] = kFormatVersion;
    auto& verts = j["vertices"] = ordered_json::array();
    for (const auto& v : mesh.vertices()) verts.push_back({v[0], v[1], v[2]});
    auto& tets = j["tets"] = ordered_json::array();
    for (const auto& t : mesh.tets()) tets.push_back({t[0], t[1], t[2], t[3]});
    auto& caps = j["caps"] = ordered_json::array();
    for (const auto& cap : mesh.caps()) {
        ordered_json jc;
        jc["name"] = cap.name;
        auto& faces = jc["faces"] = ordered_json::array();
        for (const auto& f : cap.faces) faces.push_back({f[0], f[1], f[2]});
        caps.push_back(std::move(jc));
    }
    if (fields) {
        fields->validate();
        require(fields->node_count() == mesh.node_count(), errc::field_length_mismatch,
                "fields do not match mesh node count");
        ordered_json pd;
        pd["space"] = fields->space == FieldSpace::raw ? "raw" : "normalized";
        auto& pr = pd["pressure"] = ordered_json::array();
        for (double p : fields->pressure) pr.push_back(p);
        auto& vel = pd["velocity"] = ordered_json::array();
        for (const auto& v : fields->velocity) vel.push_back({v[0], v[1], v[2]});
        j["point_data"] = std::move(pd);
    }
    return j;
}

inline void save_mesh(const fs::path& path, const VolumeMesh& mesh,
                      const NodeFields* fields = nullptr) {
    save_json(path, mesh_to_json(mesh, fields));
}

inline MeshWithFields mesh_from_json(const ordered_json& j, const std::string& context) {
    try {
        std::vector<Vec3> vertices;
        for (const auto& v : j.at("vertices"))
            vertices.emplace_back(v.at(0).get<double>(), v.at(1).get<double>(),
                                  v.at(2).get<double>());
        std::vector<std::array<int, 4>> tets;
        for (const auto& t : j.at("tets"))
            tets.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>(),
                            t.at(3).get<int>()});
        std::vector<CapPatch> caps;
        if (j.contains("caps")) {
            for (const auto& jc : j.at("caps")) {
                CapPatch cap;
                cap.name = jc.at("name").get<std::string>();
                for (const auto& f : jc.at("faces"))
                    cap.faces.push_back(
                        {f.at(0).get<int>(), f.at(1).get<int>(), f.at(2).get<int>()});
                caps.push_back(std::move(cap));
            }
        }
        // Relaxed cap fold check on load: documents may hold predicted meshes.
        MeshWithFields out{VolumeMesh(std::move(vertices), std::move(tets), std::move(caps),
                                      /*strict_caps=*/false),
                           {}};
        if (j.contains("point_data")) {
            const auto& pd = j.at("point_data");
            NodeFields f;
            const std::string space = pd.at("space").get<std::string>();
            require(space == "raw" || space == "normalized", errc::io_error,
                    "unknown field space '" + space + "'");
            f.space = space == "raw" ? FieldSpace::raw : FieldSpace::normalized;
            for (const auto& p : pd.at("pressure")) f.pressure.push_back(p.get<double>());
            for (const auto& v : pd.at("velocity"))
                f.velocity.emplace_back(v.at(0).get<double>(), v.at(1).get<double>(),
                                        v.at(2).get<double>());
            f.validate();
            require(f.node_count() == out.mesh.node_count(), errc::io_error,
                    "point_data length does not match vertices");
            out.fields = std::move(f);
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        fail(errc::io_error, "malformed mesh document " + context + ": " + e.what());
    }
}

inline MeshWithFields load_mesh(const fs::path& path) {
    return mesh_from_json(load_json(path), "'" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Image volumes: JSON sidecar + raw little-endian f32 blob, x fastest within
// channel-major layout.

inline void save_image(const fs::path& json_path, const ImageVolume& img) {
    img.validate();
    const fs::path raw_path = fs::path(json_path).replace_extension(".raw");
    ordered_json j;
    j["format_version"] = kFormatVersion;
    j["dims"] = {img.nx, img.ny, img.nz};
    j["spacing"] = {img.spacing[0], img.spacing[1], img.spacing[2]};
    j["origin"] = {img.origin[0], img.origin[1], img.origin[2]};
    j["channels"] = img.channels;
    j["dtype"] = "f32";
    j["data"] = raw_path.filename().string();
    save_json(json_path, j);

    std::ofstream raw(raw_path, std::ios::binary);
    require(bool(raw), errc::io_error, "cannot open '" + raw_path.string() + "'");
    raw.write(reinterpret_cast<const char*>(img.values.data()),
              std::streamsize(img.values.size() * sizeof(float)));
    require(bool(raw), errc::io_error, "failed writing '" + raw_path.string() + "'");
}

inline ImageVolume load_image(const fs::path& json_path) {
    const ordered_json j = load_json(json_path);
    ImageVolume img;
    try {
        img.nx = j.at("dims").at(0).get<int>();
        img.ny = j.at("dims").at(1).get<int>();
        img.nz = j.at("dims").at(2).get<int>();
        img.spacing = Vec3(j.at("spacing").at(0).get<double>(), j.at("spacing").at(1).get<double>(),
                           j.at("spacing").at(2).get<double>());
        img.origin = Vec3(j.at("origin").at(0).get<double>(), j.at("origin").at(1).get<double>(),
                          j.at("origin").at(2).get<double>());
        img.channels = j.at("channels").get<int>();
        require(j.at("dtype").get<std::string>() == "f32", errc::io_error,
                "unsupported image dtype");
    } catch (const nlohmann::json::exception& e) {
        fail(errc::io_error, "malformed image sidecar '" + json_path.string() + "': " + e.what());
    }
    const fs::path raw_path = json_path.parent_path() / j.at("data").get<std::string>();
    std::ifstream raw(raw_path, std::ios::binary);
    require(bool(raw), errc::io_error, "cannot open '" + raw_path.string() + "'");
    const std::size_t count = std::size_t(img.channels) * img.voxel_count();
    img.values.resize(count);
    raw.read(reinterpret_cast<char*>(img.values.data()), std::streamsize(count * sizeof(float)));
    require(std::size_t(raw.gcount()) == count * sizeof(float), errc::io_error,
            "raw blob '" + raw_path.string() + "' is shorter than the sidecar promises");
    img.validate();
    return img;
}

// ---------------------------------------------------------------------------
// Normalization stats.

inline void save_stats(const fs::path& path, const NormStats& stats) {
    stats.validate();
    ordered_json j;
    j["format_version"] = kFormatVersion;
    j["pressure"] = {{"mean", stats.pressure.mean}, {"std", stats.pressure.std}};
    const char* names[3] = {"velocity_x", "velocity_y", "velocity_z"};
    for (int k = 0; k < 3; ++k)
        j[names[k]] = {{"mean", stats.velocity[k].mean}, {"std", stats.velocity[k].std}};
    j["provenance"] = stats.provenance;
    save_json(path, j);
}

inline NormStats load_stats(const fs::path& path) {
    const ordered_json j = load_json(path);
    NormStats stats;
    try {
        stats.pressure = {j.at("pressure").at("mean").get<double>(),
                          j.at("pressure").at("std").get<double>()};
        const char* names[3] = {"velocity_x", "velocity_y", "velocity_z"};
        for (int k = 0; k < 3; ++k)
            stats.velocity[k] = {j.at(names[k]).at("mean").get<double>(),
                                 j.at(names[k]).at("std").get<double>()};
        stats.provenance = j.value("provenance", "");
    } catch (const nlohmann::json::exception& e) {
        fail(errc::io_error, "malformed stats file '" + path.string() + "': " + e.what());
    }
    stats.validate();
    return stats;
}

// ---------------------------------------------------------------------------
// Centerlines.

inline void save_centerline(const fs::path& path, const Centerline& line) {
    line.validate();
    ordered_json j;
    j["format_version"] = kFormatVersion;
    j["label"] = line.label;
    auto& pts = j["points"] = ordered_json::array();
    for (const auto& p : line.points) pts.push_back({p[0], p[1], p[2]});
    save_json(path, j);
}

inline Centerline load_centerline(const fs::path& path) {
    const ordered_json j = load_json(path);
    Centerline line;
    try {
        line.label = j.at("label").get<std::string>();
        for (const auto& p : j.at("points"))
            line.points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(),
                                     p.at(2).get<double>());
    } catch (const nlohmann::json::exception& e) {
        fail(errc::io_error, "malformed centerline '" + path.string() + "': " + e.what());
    }
    line.validate();
    return line;
}

// ---------------------------------------------------------------------------
// Weight sets: JSON manifest + raw f32 blob.

inline void save_weights(const fs::path& manifest_path, const WeightSet& weights) {
    const fs::path blob_path = fs::path(manifest_path).replace_extension(".bin");
    ordered_json j;
    j["format_version"] = kFormatVersion;
    ordered_json hp;
    hp["level_channels"] = weights.hyper.level_channels;
    hp["branch_widths"] = weights.hyper.branch_widths;
    hp["branch_levels"] = weights.hyper.branch_levels;
    hp["leaky_slope"] = weights.hyper.leaky_slope;
    hp["dropout_rate"] = weights.hyper.dropout_rate;
    hp["instance_norm_eps"] = weights.hyper.instance_norm_eps;
    j["hyperparameters"] = std::move(hp);

    auto& tensors = j["tensors"] = ordered_json::array();
    std::size_t offset = 0;
    for (const auto& spec : weights.specs()) {
        ordered_json t;
        t["name"] = spec.name;
        t["shape"] = spec.shape;
        t["dtype"] = "f32";
        t["offset"] = offset;
        offset += spec.element_count() * sizeof(float);
        tensors.push_back(std::move(t));
    }
    j["checksum"] = "fnv1a64:" + to_hex(weights.checksum());
    j["blob"] = blob_path.filename().string();
    save_json(manifest_path, j);

    std::ofstream raw(blob_path, std::ios::binary);
    require(bool(raw), errc::io_error, "cannot open '" + blob_path.string() + "'");
    for (const auto& blob : weights.blobs())
        raw.write(reinterpret_cast<const char*>(blob.data()),
                  std::streamsize(blob.size() * sizeof(float)));
    require(bool(raw), errc::io_error, "failed writing '" + blob_path.string() + "'");
}

inline WeightSet load_weights(const fs::path& manifest_path) {
    const ordered_json j = load_json(manifest_path);
    WeightSet ws;
    try {
        const auto& hp = j.at("hyperparameters");
        ws.hyper.level_channels = hp.at("level_channels").get<std::vector<int>>();
        ws.hyper.branch_widths = hp.at("branch_widths").get<std::array<int, 3>>();
        ws.hyper.branch_levels = hp.at("branch_levels").get<std::array<std::array<int, 2>, 3>>();
        ws.hyper.leaky_slope = hp.at("leaky_slope").get<double>();
        ws.hyper.dropout_rate = hp.at("dropout_rate").get<double>();
        ws.hyper.instance_norm_eps = hp.at("instance_norm_eps").get<double>();

        const fs::path blob_path =
            manifest_path.parent_path() / j.at("blob").get<std::string>();
        std::ifstream raw(blob_path, std::ios::binary);
        require(bool(raw), errc::io_error, "cannot open '" + blob_path.string() + "'");
        std::vector<char> bytes((std::istreambuf_iterator<char>(raw)),
                                std::istreambuf_iterator<char>());

        for (const auto& t : j.at("tensors")) {
            const std::string name = t.at("name").get<std::string>();
            const auto shape = t.at("shape").get<std::vector<int>>();
            require(t.at("dtype").get<std::string>() == "f32", errc::io_error,
                    "unsupported tensor dtype for '" + name + "'");
            const std::size_t offset = t.at("offset").get<std::size_t>();
            std::size_t count = 1;
            for (int d : shape) count *= std::size_t(d);
            require(offset + count * sizeof(float) <= bytes.size(), errc::io_error,
                    "tensor '" + name + "' extends past the blob");
            std::vector<float> values(count);
            std::memcpy(values.data(), bytes.data() + offset, count * sizeof(float));
            ws.set(name, shape, std::move(values));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(errc::io_error, "malformed weight manifest '" + manifest_path.string() +
                                 "': " + e.what());
    }
    const std::string declared = j.value("checksum", "");
    const std::string actual = "fnv1a64:" + to_hex(ws.checksum());
    require(declared == actual, errc::io_error,
            "weight blob checksum mismatch (manifest " + declared + ", blob " + actual + ")");
    return ws;
}

// ---------------------------------------------------------------------------
// CSV emitters (shortest round-trip float text).

inline std::string trace_csv(const FitTrace& trace) {
    std::string out = "iteration,point,point_surface,edge,edge_surface,aspect,cap,cfd,mesh\n";
    for (const auto& it : trace.iterations) {
        out += std::to_string(it.iteration);
        for (double v : {it.point, it.point_surface, it.edge, it.edge_surface, it.aspect, it.cap,
                         it.cfd, it.mesh}) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

inline std::string profile_csv(const std::vector<ProfileSample>& profile) {
    std::string out = "s,pressure,velocity_magnitude\n";
    for (const auto& p : profile) {
        out += format_double(p.s);
        out += ',';
        out += format_double(p.pressure);
        out += ',';
        out += format_double(p.velocity_magnitude);
        out += '\n';
    }
    return out;
}

inline std::vector<ProfileSample> parse_profile_csv(const std::string& text,
                                                    const std::string& context) {
    std::vector<ProfileSample> out;
    std::istringstream in(text);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (header) {
            require(line == "s,pressure,velocity_magnitude", errc::io_error,
                    "unexpected profile CSV header in " + context);
            header = false;
            continue;
        }
        std::istringstream row(line);
        std::string cell;
        ProfileSample s;
        double* slots[3] = {&s.s, &s.pressure, &s.velocity_magnitude};
        for (int i = 0; i < 3; ++i) {
            require(bool(std::getline(row, cell, ',')), errc::io_error,
                    "short profile CSV row in " + context);
            try {
                *slots[i] = std::stod(cell);
            } catch (const std::exception&) {
                fail(errc::io_error, "bad number '" + cell + "' in " + context);
            }
        }
        out.push_back(s);
    }
    require(!out.empty(), errc::io_error, "empty profile CSV in " + context);
    return out;
}

// ---------------------------------------------------------------------------
// Legacy ASCII VTK unstructured-grid import (tets only; geometry only).

inline MeshWithFields import_vtk(const fs::path& path) {
    std::istringstream in(read_text_file(path));
    std::string tok;
    std::vector<Vec3> points;
    std::vector<std::array<int, 4>> tets;
    bool saw_points = false, saw_cells = false;

    auto next = [&](const std::string& what) {
        std::string t;
        require(bool(in >> t), errc::io_error,
                "unexpected end of VTK file while reading " + what);
        return t;
    };

    while (in >> tok) {
        if (tok == "DATASET") {
            const std::string kind = next("dataset kind");
            require(kind == "UNSTRUCTURED_GRID", errc::io_error,
                    "only UNSTRUCTURED_GRID VTK files are supported, got " + kind);
        } else if (tok == "POINTS") {
            const int n = std::stoi(next("point count"));
            next("point dtype");
            points.resize(n);
            for (int i = 0; i < n; ++i)
                for (int k = 0; k < 3; ++k) points[i][k] = std::stod(next("point coordinate"));
            saw_points = true;
        } else if (tok == "CELLS") {
            const int n = std::stoi(next("cell count"));
            next("cell list size");
            tets.reserve(n);
            for (int i = 0; i < n; ++i) {
                const int count = std::stoi(next("cell vertex count"));
                require(count == 4, errc::io_error,
                        "only tetrahedral cells are supported (cell with " +
                            std::to_string(count) + " vertices)");
                std::array<int, 4> t;
                for (int k = 0; k < 4; ++k) t[k] = std::stoi(next("cell index"));
                tets.push_back(t);
            }
            saw_cells = true;
        } else if (tok == "CELL_TYPES") {
            const int n = std::stoi(next("cell type count"));
            for (int i = 0; i < n; ++i) {
                const int type = std::stoi(next("cell type"));
                require(type == 10, errc::io_error,
                        "only VTK_TETRA (10) cells are supported, got type " +
                            std::to_string(type));
            }
        }
    }
    require(saw_points && saw_cells, errc::io_error, "VTK file lacks POINTS or CELLS");
    return MeshWithFields{VolumeMesh(std::move(points), std::move(tets)), {}};
}

}  // namespace flowmesh
