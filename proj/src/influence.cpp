#include "ctrak/influence.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ctrak {

ProjectedHessian accumulate_fp(GradientStoreReader& store) {
    const StoreHeader& hdr = store.header();
    if (hdr.count == 0) throw std::logic_error("accumulate_fp: store is empty");
    int k = static_cast<int>(hdr.k);
    ProjectedHessian h;
    h.F = Mat::Zero(k, k);
    Vec g(k);
    store.for_each([&](const ProjectedGradientRecord& rec) {
        for (int j = 0; j < k; ++j) g[j] = static_cast<double>(rec.g_proj[static_cast<std::size_t>(j)]);
        h.F.selfadjointView<Eigen::Lower>().rankUpdate(g, 1.0);
        ++h.count;
    });
    h.F /= static_cast<double>(h.count);
    // Mirror the lower triangle so F is exactly symmetric.
    h.F.triangularView<Eigen::StrictlyUpper>() = h.F.transpose();
    h.eig_mean = h.F.trace() / k;
    h.fingerprint = hdr.fingerprint;
    return h;
}

double default_lambda(const ProjectedHessian& h) { return 0.1 * h.eig_mean; }

namespace {

// Solves (F + lambda I) y = b. LLT first; if the factorization reports a
// failure the system is re-solved with eigenvalues floored at a small
// positive multiple of the mean eigenvalue.
Vec solve_regularized(const ProjectedHessian& h, double lambda, const Vec& b,
                      std::string* solver_used) {
    Mat A = h.F;
    A.diagonal().array() += lambda;
    Eigen::LLT<Mat> llt(A);
    if (llt.info() == Eigen::Success) {
        Vec y = llt.solve(b);
        if (y.allFinite()) {
            if (solver_used) *solver_used = "llt";
            return y;
        }
    }
    Eigen::SelfAdjointEigenSolver<Mat> eig(A);
    if (eig.info() != Eigen::Success)
        throw NumericalError("score_influences: factorization failed (lambda too small?)");
    double floor = std::max(1e-12 * std::max(h.eig_mean, 1.0), 1e-300);
    Vec evals = eig.eigenvalues().cwiseMax(floor);
    Vec y = eig.eigenvectors() *
            (eig.eigenvectors().transpose() * b).cwiseQuotient(evals);
    if (!y.allFinite())
        throw NumericalError("score_influences: regularized solve produced non-finite values");
    if (solver_used) *solver_used = "eig-floor";
    return y;
}

}  // namespace

InfluenceReport score_influences(GradientStoreReader& store, const ProjectedHessian& h,
                                 const Vec& g_utility, const std::string& utility_descriptor,
                                 int top_k) {
    const StoreHeader& hdr = store.header();
    if (hdr.fingerprint != h.fingerprint)
        throw FingerprintError("score_influences: store fingerprint " + hdr.fingerprint.hex() +
                               " does not match hessian fingerprint " + h.fingerprint.hex());
    require(g_utility.size() == static_cast<Eigen::Index>(hdr.k),
            "score_influences: utility gradient dimension mismatch");

    InfluenceReport report;
    report.utility_descriptor = utility_descriptor;
    report.lambda_used = h.lambda;
    report.config_fingerprint = hdr.fingerprint;

    Vec y = solve_regularized(h, h.lambda, g_utility, &report.solver);

    int k = static_cast<int>(hdr.k);
    Vec g(k);
    store.for_each([&](const ProjectedGradientRecord& rec) {
        for (int j = 0; j < k; ++j) g[j] = static_cast<double>(rec.g_proj[static_cast<std::size_t>(j)]);
        report.scores[rec.sample_id] = y.dot(g);
    });

    std::vector<std::pair<std::uint64_t, double>> ranked(report.scores.begin(),
                                                         report.scores.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(std::max(top_k, 0)),
                                          ranked.size());
    report.top_k.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n));
    return report;
}

std::map<double, InfluenceReport> lambda_sweep(GradientStoreReader& store, ProjectedHessian h,
                                               const Vec& g_utility,
                                               const std::string& utility_descriptor,
                                               const std::vector<double>& grid, int top_k) {
    require(!grid.empty(), "lambda_sweep: grid must be non-empty");
    for (double l : grid) require(l > 0.0, "lambda_sweep: grid values must be positive");
    std::map<double, InfluenceReport> out;
    for (double l : grid) {
        h.lambda = l;
        out[l] = score_influences(store, h, g_utility, utility_descriptor, top_k);
    }
    return out;
}

std::vector<double> default_lambda_grid(double lambda_star) {
    std::vector<double> grid;
    for (int e = -4; e <= 4; ++e) grid.push_back(lambda_star * std::pow(10.0, e));
    return grid;
}

namespace {

constexpr char kHessMagic[4] = {'C', 'T', 'F', 'P'};
constexpr std::uint32_t kHessVersion = 1;

}  // namespace

void save_hessian(const std::string& path, const ProjectedHessian& h) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw StorageError("cannot open hessian file for writing: " + path);
    std::uint32_t k = static_cast<std::uint32_t>(h.F.rows());
    std::uint64_t count = static_cast<std::uint64_t>(h.count);
    Crc64 crc;
    auto put = [&](const void* p, std::size_t n) {
        f.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        crc.update(p, n);
    };
    put(kHessMagic, 4);
    put(&kHessVersion, 4);
    put(&k, 4);
    put(&count, 8);
    put(&h.lambda, 8);
    put(h.fingerprint.bytes.data(), 16);
    // Row-major f64 payload.
    for (std::uint32_t i = 0; i < k; ++i)
        for (std::uint32_t j = 0; j < k; ++j) {
            double v = h.F(static_cast<int>(i), static_cast<int>(j));
            put(&v, 8);
        }
    std::uint64_t c = crc.value();
    f.write(reinterpret_cast<const char*>(&c), 8);
    if (!f) throw StorageError("hessian write failed: " + path);
}

ProjectedHessian load_hessian(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw StorageError("cannot open hessian file: " + path);
    Crc64 crc;
    auto get = [&](void* p, std::size_t n) {
        f.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!f) throw StorageError("hessian file truncated: " + path);
        crc.update(p, n);
    };
    char magic[4];
    get(magic, 4);
    if (std::memcmp(magic, kHessMagic, 4) != 0)
        throw StorageError("not a CTFP hessian file: " + path);
    std::uint32_t version, k;
    get(&version, 4);
    if (version != kHessVersion)
        throw StorageError("unsupported hessian version " + std::to_string(version));
    get(&k, 4);
    ProjectedHessian h;
    std::uint64_t count;
    get(&count, 8);
    h.count = static_cast<std::int64_t>(count);
    get(&h.lambda, 8);
    get(h.fingerprint.bytes.data(), 16);
    h.F.resize(k, k);
    for (std::uint32_t i = 0; i < k; ++i)
        for (std::uint32_t j = 0; j < k; ++j) {
            double v;
            get(&v, 8);
            h.F(static_cast<int>(i), static_cast<int>(j)) = v;
        }
    std::uint64_t stored;
    f.read(reinterpret_cast<char*>(&stored), 8);
    if (!f || stored != crc.value())
        throw StorageError("hessian checksum mismatch: " + path);
    h.eig_mean = h.F.trace() / std::max<std::uint32_t>(k, 1);
    return h;
}

namespace {

std::string json_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            default: out += c;
        }
    }
    return out;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string report_to_json(const InfluenceReport& report) {
    std::ostringstream os;
    os << "{\n";
    os << "  \"utility_descriptor\": \"" << json_escape(report.utility_descriptor) << "\",\n";
    os << "  \"lambda_used\": " << fmt_double(report.lambda_used) << ",\n";
    os << "  \"config_fingerprint\": \"" << report.config_fingerprint.hex() << "\",\n";
    os << "  \"solver\": \"" << report.solver << "\",\n";
    os << "  \"top_k\": [";
    for (std::size_t i = 0; i < report.top_k.size(); ++i) {
        if (i) os << ",";
        os << "\n    {\"rank\": " << (i + 1) << ", \"sample_id\": " << report.top_k[i].first
           << ", \"score\": " << fmt_double(report.top_k[i].second) << "}";
    }
    os << "\n  ],\n";
    os << "  \"scores\": {";
    bool first = true;
    for (const auto& [id, score] : report.scores) {
        if (!first) os << ",";
        first = false;
        os << "\n    \"" << id << "\": " << fmt_double(score);
    }
    os << "\n  }\n}\n";
    return os.str();
}

std::string report_to_csv(const InfluenceReport& report) {
    std::vector<std::pair<std::uint64_t, double>> ranked(report.scores.begin(),
                                                         report.scores.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::ostringstream os;
    os << "rank,sample_id,score\n";
    for (std::size_t i = 0; i < ranked.size(); ++i)
        os << (i + 1) << "," << ranked[i].first << "," << fmt_double(ranked[i].second) << "\n";
    return os.str();
}

void write_report_files(const InfluenceReport& report, const std::string& basename) {
    {
        std::ofstream f(basename + ".json", std::ios::trunc);
        if (!f) throw StorageError("cannot write report: " + basename + ".json");
        f << report_to_json(report);
    }
    {
        std::ofstream f(basename + ".csv", std::ios::trunc);
        if (!f) throw StorageError("cannot write report: " + basename + ".csv");
        f << report_to_csv(report);
    }
}

namespace {

constexpr char kUtilMagic[4] = {'C', 'T', 'U', 'V'};
constexpr std::uint32_t kUtilVersion = 1;

}  // namespace

void save_utility_gradient(const std::string& path, const UtilityGradientFile& u) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw StorageError("cannot open utility gradient file for writing: " + path);
    Crc64 crc;
    auto put = [&](const void* p, std::size_t n) {
        f.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        crc.update(p, n);
    };
    put(kUtilMagic, 4);
    put(&kUtilVersion, 4);
    put(&u.k, 4);
    put(&u.projector_seed, 8);
    put(u.fingerprint.bytes.data(), 16);
    std::uint32_t len = static_cast<std::uint32_t>(u.descriptor.size());
    put(&len, 4);
    put(u.descriptor.data(), len);
    for (std::uint32_t j = 0; j < u.k; ++j) {
        float v = static_cast<float>(u.g[static_cast<int>(j)]);
        put(&v, 4);
    }
    std::uint64_t c = crc.value();
    f.write(reinterpret_cast<const char*>(&c), 8);
    if (!f) throw StorageError("utility gradient write failed: " + path);
}

UtilityGradientFile load_utility_gradient(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw StorageError("cannot open utility gradient file: " + path);
    Crc64 crc;
    auto get = [&](void* p, std::size_t n) {
        f.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!f) throw StorageError("utility gradient file truncated: " + path);
        crc.update(p, n);
    };
    char magic[4];
    get(magic, 4);
    if (std::memcmp(magic, kUtilMagic, 4) != 0)
        throw StorageError("not a CTUV utility gradient file: " + path);
    std::uint32_t version;
    get(&version, 4);
    if (version != kUtilVersion)
        throw StorageError("unsupported utility gradient version " + std::to_string(version));
    UtilityGradientFile u;
    get(&u.k, 4);
    get(&u.projector_seed, 8);
    get(u.fingerprint.bytes.data(), 16);
    std::uint32_t len;
    get(&len, 4);
    u.descriptor.resize(len);
    if (len) get(u.descriptor.data(), len);
    u.g.resize(static_cast<int>(u.k));
    for (std::uint32_t j = 0; j < u.k; ++j) {
        float v;
        get(&v, 4);
        u.g[static_cast<int>(j)] = static_cast<double>(v);
    }
    std::uint64_t stored;
    f.read(reinterpret_cast<char*>(&stored), 8);
    if (!f || stored != crc.value())
        throw StorageError("utility gradient checksum mismatch: " + path);
    return u;
}

}  // namespace ctrak
