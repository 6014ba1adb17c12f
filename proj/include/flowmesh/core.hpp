#pragma once

// Shared primitives: error codes, deterministic reductions, a chunked
// parallel-for whose results do not depend on the thread count, seeded
// RNG helpers and float/text round-tripping.

#include <Eigen/Dense>

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace flowmesh {

using Vec3 = Eigen::Vector3d;

enum class errc {
    bad_argument,
    index_out_of_range,
    degenerate_cell,
    nonmanifold_surface,
    bad_cap_labeling,
    empty_point_set,
    no_edges,
    missing_caps,
    degenerate_face,
    field_length_mismatch,
    wrong_branch_count,
    non_finite_loss,
    correspondence_mismatch,
    shape_mismatch,
    bad_input_size,
    missing_weight,
    zero_sigma,
    wrong_space,
    empty_source,
    grid_mismatch,
    empty_surface,
    zero_range,
    too_few_samples,
    degenerate_polyline,
    k_too_large,
    empty_curve,
    length_mismatch,
    spec_infeasible,
    self_intersection,
    io_error,
};

inline const char* errc_name(errc c) {
    switch (c) {
        case errc::bad_argument: return "BadArgument";
        case errc::index_out_of_range: return "IndexOutOfRange";
        case errc::degenerate_cell: return "DegenerateCell";
        case errc::nonmanifold_surface: return "NonManifoldSurface";
        case errc::bad_cap_labeling: return "BadCapLabeling";
        case errc::empty_point_set: return "EmptyPointSet";
        case errc::no_edges: return "NoEdges";
        case errc::missing_caps: return "MissingCaps";
        case errc::degenerate_face: return "DegenerateFace";
        case errc::field_length_mismatch: return "FieldLengthMismatch";
        case errc::wrong_branch_count: return "WrongBranchCount";
        case errc::non_finite_loss: return "NonFiniteLoss";
        case errc::correspondence_mismatch: return "CorrespondenceMismatch";
        case errc::shape_mismatch: return "ShapeMismatch";
        case errc::bad_input_size: return "BadInputSize";
        case errc::missing_weight: return "MissingWeight";
        case errc::zero_sigma: return "ZeroSigma";
        case errc::wrong_space: return "WrongSpace";
        case errc::empty_source: return "EmptySource";
        case errc::grid_mismatch: return "GridMismatch";
        case errc::empty_surface: return "EmptySurface";
        case errc::zero_range: return "ZeroRange";
        case errc::too_few_samples: return "TooFewSamples";
        case errc::degenerate_polyline: return "DegeneratePolyline";
        case errc::k_too_large: return "KTooLarge";
        case errc::empty_curve: return "EmptyCurve";
        case errc::length_mismatch: return "LengthMismatch";
        case errc::spec_infeasible: return "SpecInfeasible";
        case errc::self_intersection: return "SelfIntersection";
        case errc::io_error: return "IoError";
    }
    return "UnknownError";
}

// True for failures that arise from the numerics of an otherwise valid
// computation (CLI exit code 3); everything else is an input error (exit 2).
inline bool is_numeric_failure(errc c) {
    switch (c) {
        case errc::non_finite_loss:
        case errc::self_intersection:
        case errc::spec_infeasible:
        case errc::degenerate_cell:
            return true;
        default:
            return false;
    }
}

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    errc code() const { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool condition, errc code, const std::string& message) {
    if (!condition) fail(code, message);
}

// ---------------------------------------------------------------------------
// Deterministic reductions

// Pairwise (cascade) summation over a fixed index range. The reduction tree
// depends only on the element count, so the result is reproducible no matter
// how the values were produced.
template <typename F>
double pairwise_sum(std::size_t n, F&& value_at) {
    struct Rec {
        static double run(std::size_t begin, std::size_t count, F& f) {
            if (count == 0) return 0.0;
            if (count <= 8) {
                double s = 0.0;
                for (std::size_t i = 0; i < count; ++i) s += f(begin + i);
                return s;
            }
            std::size_t half = count / 2;
            return run(begin, half, f) + run(begin + half, count - half, f);
        }
    };
    return Rec::run(0, n, value_at);
}

inline double pairwise_sum(const std::vector<double>& values) {
    return pairwise_sum(values.size(), [&](std::size_t i) { return values[i]; });
}

// ---------------------------------------------------------------------------
// Thread pool-free parallel for. Work is split into contiguous chunks and each
// index is processed by exactly one thread, so outputs written per-index are
// bit-identical for every thread count.

inline std::atomic<int>& thread_count_storage() {
    static std::atomic<int> count{1};
    return count;
}

inline void set_thread_count(int n) {
    thread_count_storage().store(n < 1 ? 1 : n);
}

inline int thread_count() { return thread_count_storage().load(); }

template <typename F>
void parallel_for(std::size_t n, F&& body) {
    const int threads = std::min<std::size_t>(thread_count(), n ? n : 1);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::atomic<std::size_t> next{0};
    const std::size_t chunk = std::max<std::size_t>(1, n / (4 * threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&]() {
            for (;;) {
                std::size_t begin = next.fetch_add(chunk);
                if (begin >= n) return;
                std::size_t end = std::min(n, begin + chunk);
                for (std::size_t i = begin; i < end; ++i) body(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// Seeded RNG (xorshift*) with explicit scalar draws so sequences do not
// depend on standard-library distribution internals.

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    std::uint64_t next_u64() {
        // xorshift* — small, fast, reproducible everywhere.
        std::uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545f4914f6cdd1dull;
    }

    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller without caching; two draws per call.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + int(next_u64() % std::uint64_t(hi - lo + 1));
    }

private:
    std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// Text round-tripping for floats (shortest representation) and checksums.

inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string to_hex(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

}  // namespace flowmesh
