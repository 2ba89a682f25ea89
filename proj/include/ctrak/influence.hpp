#ifndef CTRAK_INFLUENCE_HPP
#define CTRAK_INFLUENCE_HPP

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ctrak/store.hpp"

namespace ctrak {

// F_P = (1/N) sum of g g^T over stored projected gradients, with the
// regularizer lambda of the (F + lambda I) solve.
struct ProjectedHessian {
    Mat F;
    std::int64_t count = 0;
    double lambda = 0.0;
    double eig_mean = 0.0;  // trace(F) / k
    Fingerprint fingerprint;
};

ProjectedHessian accumulate_fp(GradientStoreReader& store);

// 0.1 x mean eigenvalue of F_P.
double default_lambda(const ProjectedHessian& h);

struct InfluenceReport {
    std::string utility_descriptor;
    std::map<std::uint64_t, double> scores;
    std::vector<std::pair<std::uint64_t, double>> top_k;  // descending score, ties by id
    double lambda_used = 0.0;
    Fingerprint config_fingerprint;
    std::string solver = "llt";  // "llt" or "eig-floor" fallback
};

InfluenceReport score_influences(GradientStoreReader& store, const ProjectedHessian& h,
                                 const Vec& g_utility, const std::string& utility_descriptor,
                                 int top_k = 10);

std::map<double, InfluenceReport> lambda_sweep(GradientStoreReader& store, ProjectedHessian h,
                                               const Vec& g_utility,
                                               const std::string& utility_descriptor,
                                               const std::vector<double>& grid, int top_k = 10);

// The 9-point log grid lambda* x 10^{-4..4}.
std::vector<double> default_lambda_grid(double lambda_star);

void save_hessian(const std::string& path, const ProjectedHessian& h);
ProjectedHessian load_hessian(const std::string& path);

std::string report_to_json(const InfluenceReport& report);
std::string report_to_csv(const InfluenceReport& report);
void write_report_files(const InfluenceReport& report, const std::string& basename);

// Utility-gradient container ("CTUV"): projected utility vector plus the
// identity fingerprint of the model/projector configuration it came from.
struct UtilityGradientFile {
    std::uint32_t k = 0;
    std::uint64_t projector_seed = 0;
    Fingerprint fingerprint;
    std::string descriptor;
    Vec g;  // length k
};

void save_utility_gradient(const std::string& path, const UtilityGradientFile& u);
UtilityGradientFile load_utility_gradient(const std::string& path);

}  // namespace ctrak

#endif
