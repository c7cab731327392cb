#include "seal/analyze.hpp"

#include "seal/errors.hpp"
#include "seal/kernels.hpp"
#include "seal/random.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

namespace seal {

ProjectionMethod projection_method_from_string(std::string_view s) {
    if (s == "pca") return ProjectionMethod::Pca;
    if (s == "tsne" || s == "t-sne") return ProjectionMethod::Tsne;
    throw InvalidConfig("unknown projection '" + std::string(s) + "'");
}

namespace {

void require_points(const RepresentationSet & set) {
    if (set.entries.size() < 3) {
        throw TooFewPoints("projection needs at least 3 entries, got " + std::to_string(set.entries.size()));
    }
}

Eigen::MatrixXd centered_matrix(const RepresentationSet & set) {
    const size_t n = set.entries.size();
    const size_t d = set.entries.front().vector.size();
    Eigen::MatrixXd x(n, d);
    for (size_t i = 0; i < n; ++i) {
        if (set.entries[i].vector.size() != d) {
            throw DimensionMismatch("representation entries differ in dimension");
        }
        for (size_t k = 0; k < d; ++k) {
            x(i, k) = set.entries[i].vector[k];
        }
    }
    x.rowwise() -= x.colwise().mean();
    return x;
}

std::vector<ProjectedPoint> points_from(const RepresentationSet & set, const Eigen::MatrixXd & y) {
    std::vector<ProjectedPoint> out(set.entries.size());
    for (size_t i = 0; i < out.size(); ++i) {
        const auto & e = set.entries[i];
        out[i] = {y(i, 0), y(i, 1), e.category, e.trace_id, e.thought_index};
    }
    return out;
}

} // namespace

std::vector<ProjectedPoint> pca_project(const RepresentationSet & set) {
    require_points(set);
    const Eigen::MatrixXd x = centered_matrix(set);
    const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(x.rows() - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    const Eigen::Index d = cov.rows();
    Eigen::MatrixXd w(d, 2);
    for (Eigen::Index c = 0; c < 2; ++c) {
        // eigenvalues ascend
        Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
        if (d > c) {
            v = solver.eigenvectors().col(d - 1 - c);
        }
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0) {
            v = -v;
        }
        w.col(c) = v;
    }
    return points_from(set, x * w);
}

namespace {

// conditional P rows with entropy matched to log(perplexity)
std::vector<double> joint_probabilities(const std::vector<double> & d2, size_t n, double perplexity) {
    std::vector<double> p(n * n, 0.0);
    const double target = std::log(perplexity);
    #pragma omp parallel for schedule(static)
    for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(n); ++si) {
        const size_t i = static_cast<size_t>(si);
        double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
        std::vector<double> row(n);
        for (int iter = 0; iter < 200; ++iter) {
            double sum = 0.0, dot = 0.0;
            for (size_t j = 0; j < n; ++j) {
                row[j] = j == i ? 0.0 : std::exp(-beta * d2[i * n + j]);
                sum += row[j];
                dot += row[j] * d2[i * n + j];
            }
            if (sum <= 0.0) {
                sum = std::numeric_limits<double>::min();
            }
            const double entropy = std::log(sum) + beta * dot / sum;
            for (size_t j = 0; j < n; ++j) {
                row[j] /= sum;
            }
            const double diff = entropy - target;
            if (std::fabs(diff) < 1e-5) {
                break;
            }
            if (diff > 0) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
        std::copy(row.begin(), row.end(), p.begin() + static_cast<std::ptrdiff_t>(i * n));
    }
    std::vector<double> joint(n * n);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) {
            joint[i * n + j] = std::max((p[i * n + j] + p[j * n + i]) / (2.0 * static_cast<double>(n)), 1e-12);
        }
    }
    return joint;
}

} // namespace

std::vector<ProjectedPoint> tsne_project(const RepresentationSet & set, const TsneOptions & options) {
    require_points(set);
    const size_t n = set.entries.size();
    const Eigen::MatrixXd x = centered_matrix(set);
    const size_t d = static_cast<size_t>(x.cols());
    std::vector<double> xs(n * d);
    for (size_t i = 0; i < n; ++i) {
        for (size_t k = 0; k < d; ++k) {
            xs[i * d + k] = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
        }
    }
    std::vector<double> d2(n * n);
    kernels::parallel::pairwise_sq_distances(xs.data(), d2.data(), n, d);
    // perplexity must stay below the number of neighbours
    const double perplexity = std::min(options.perplexity, std::max(1.0, (static_cast<double>(n) - 1.0) / 3.0));
    const std::vector<double> p = joint_probabilities(d2, n, perplexity);

    Rng rng(options.seed);
    std::vector<double> y(n * 2), dy(n * 2), update(n * 2, 0.0), gains(n * 2, 1.0);
    for (auto & v : y) {
        v = 1e-4 * rng.normal();
    }
    const double lr = 200.0;
    std::vector<double> q(n * n);
    for (size_t iter = 0; iter < options.iterations; ++iter) {
        const double exaggeration = iter < 250 ? 12.0 : 1.0;
        const double momentum = iter < 250 ? 0.5 : 0.8;
        kernels::parallel::pairwise_sq_distances(y.data(), q.data(), n, 2);
        double qsum = 0.0;
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = 0; j < n; ++j) {
                q[i * n + j] = i == j ? 0.0 : 1.0 / (1.0 + q[i * n + j]);
                qsum += q[i * n + j];
            }
        }
        #pragma omp parallel for schedule(static)
        for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(n); ++si) {
            const size_t i = static_cast<size_t>(si);
            double gx = 0.0, gy = 0.0;
            for (size_t j = 0; j < n; ++j) {
                const double w = q[i * n + j];
                const double mult = (exaggeration * p[i * n + j] - w / qsum) * w;
                gx += mult * (y[i * 2] - y[j * 2]);
                gy += mult * (y[i * 2 + 1] - y[j * 2 + 1]);
            }
            dy[i * 2] = 4.0 * gx;
            dy[i * 2 + 1] = 4.0 * gy;
        }
        for (size_t k = 0; k < n * 2; ++k) {
            const bool same = (dy[k] > 0) == (update[k] > 0);
            gains[k] = std::max(same ? gains[k] * 0.8 : gains[k] + 0.2, 0.01);
            update[k] = momentum * update[k] - lr * gains[k] * dy[k];
            y[k] += update[k];
        }
        double mx = 0.0, my = 0.0;
        for (size_t i = 0; i < n; ++i) {
            mx += y[i * 2];
            my += y[i * 2 + 1];
        }
        mx /= static_cast<double>(n);
        my /= static_cast<double>(n);
        for (size_t i = 0; i < n; ++i) {
            y[i * 2] -= mx;
            y[i * 2 + 1] -= my;
        }
    }
    Eigen::MatrixXd out(n, 2);
    for (size_t i = 0; i < n; ++i) {
        out(static_cast<Eigen::Index>(i), 0) = y[i * 2];
        out(static_cast<Eigen::Index>(i), 1) = y[i * 2 + 1];
    }
    return points_from(set, out);
}

std::vector<ProjectedPoint> project(const RepresentationSet & set, ProjectionMethod method, const TsneOptions & tsne) {
    return method == ProjectionMethod::Pca ? pca_project(set) : tsne_project(set, tsne);
}

std::string projection_csv(std::span<const ProjectedPoint> points) {
    std::ostringstream os;
    os << "trace_id,thought_index,category,x,y\n" << std::setprecision(9);
    for (const auto & p : points) {
        os << p.trace_id << ',' << p.thought_index << ',' << to_string(p.category) << ',' << p.x << ',' << p.y << '\n';
    }
    return os.str();
}

SeparabilityRow separability(const RepresentationSet & set) {
    SeparabilityRow row;
    row.layer = set.layer;
    const size_t n = set.entries.size();
    std::vector<int> group(n);
    for (size_t i = 0; i < n; ++i) {
        group[i] = set.entries[i].category == Category::Execution ? 0 : 1;
        (group[i] == 0 ? row.n_execution : row.n_other) += 1;
    }
    if (row.n_execution < 5 || row.n_other < 5) {
        throw InsufficientData("separability needs at least 5 Execution and 5 Reflection/Transition entries, got " +
                               std::to_string(row.n_execution) + " and " + std::to_string(row.n_other));
    }
    const size_t d = set.entries.front().vector.size();
    std::vector<double> xs(n * d);
    for (size_t i = 0; i < n; ++i) {
        if (set.entries[i].vector.size() != d) {
            throw DimensionMismatch("representation entries differ in dimension");
        }
        std::copy(set.entries[i].vector.begin(), set.entries[i].vector.end(), xs.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    // group sums accumulated in entry order
    std::array<std::vector<double>, 2> sums{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    for (size_t i = 0; i < n; ++i) {
        for (size_t k = 0; k < d; ++k) {
            sums[static_cast<size_t>(group[i])][k] += xs[i * d + k];
        }
    }
    const std::array<double, 2> counts{static_cast<double>(row.n_execution), static_cast<double>(row.n_other)};

    std::vector<double> dist(n * n);
    kernels::parallel::pairwise_sq_distances(xs.data(), dist.data(), n, d);
    for (auto & v : dist) {
        v = std::sqrt(v);
    }

    std::vector<int> hit(n);
    std::vector<double> sil(n);
    #pragma omp parallel for schedule(static)
    for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(n); ++si) {
        const size_t i = static_cast<size_t>(si);
        const size_t g = static_cast<size_t>(group[i]);
        std::array<double, 2> cd{};
        for (size_t c = 0; c < 2; ++c) {
            const double cnt = c == g ? counts[c] - 1.0 : counts[c];
            double acc = 0.0;
            for (size_t k = 0; k < d; ++k) {
                const double mean = (sums[c][k] - (c == g ? xs[i * d + k] : 0.0)) / cnt;
                const double diff = xs[i * d + k] - mean;
                acc += diff * diff;
            }
            cd[c] = acc;
        }
        hit[i] = cd[g] < cd[1 - g] ? 1 : 0;

        std::array<double, 2> total{};
        for (size_t j = 0; j < n; ++j) {
            total[static_cast<size_t>(group[j])] += dist[i * n + j];
        }
        const double a = total[g] / (counts[g] - 1.0);
        const double b = total[1 - g] / counts[1 - g];
        const double m = std::max(a, b);
        sil[i] = m > 0.0 ? (b - a) / m : 0.0;
    }
    double acc = 0.0, s = 0.0;
    for (size_t i = 0; i < n; ++i) {
        acc += hit[i];
        s += sil[i];
    }
    row.centroid_accuracy = acc / static_cast<double>(n);
    row.silhouette = s / static_cast<double>(n);
    return row;
}

std::vector<SeparabilityRow> separability(std::span<const RepresentationSet> per_layer) {
    std::vector<SeparabilityRow> rows;
    for (const auto & set : per_layer) {
        rows.push_back(separability(set));
    }
    return rows;
}

std::string separability_csv(std::span<const SeparabilityRow> rows) {
    std::ostringstream os;
    os << "layer,n_execution,n_other,centroid_accuracy,silhouette\n" << std::setprecision(6);
    for (const auto & r : rows) {
        os << r.layer << ',' << r.n_execution << ',' << r.n_other << ',' << r.centroid_accuracy << ',' << r.silhouette
           << '\n';
    }
    return os.str();
}

nlohmann::json to_json(const SeparabilityRow & row) {
    return {{"layer", row.layer},
            {"n_execution", row.n_execution},
            {"n_other", row.n_other},
            {"centroid_accuracy", row.centroid_accuracy},
            {"silhouette", row.silhouette}};
}

RewordedCounts reworded_count(std::span<const ReasoningTrace> traces, const ClassificationRules & rules,
                              std::string label) {
    RewordedCounts c;
    c.label = std::move(label);
    c.traces = traces.size();
    for (const auto & t : traces) {
        for (const auto & th : t.thoughts) {
            const Classification k = classify_text(th.text, rules);
            if (k.category == Category::Reflection) {
                ++c.total_reflection;
                c.reflection += k.matched_by == MatchKind::Phrase ? 1 : 0;
            } else if (k.category == Category::Transition) {
                ++c.total_transition;
                c.transition += k.matched_by == MatchKind::Phrase ? 1 : 0;
            }
        }
    }
    return c;
}

std::string reworded_csv(std::span<const RewordedCounts> rows) {
    std::ostringstream os;
    os << "label,traces,reworded_reflection,reworded_transition,reworded_total,total_reflection,total_transition\n";
    for (const auto & r : rows) {
        os << r.label << ',' << r.traces << ',' << r.reflection << ',' << r.transition << ',' << r.reworded() << ','
           << r.total_reflection << ',' << r.total_transition << '\n';
    }
    return os.str();
}

} // namespace seal
