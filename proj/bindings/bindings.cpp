#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "qbm/bxs.hpp"
#include "qbm/coreset.hpp"
#include "qbm/error.hpp"
#include "qbm/exact.hpp"
#include "qbm/experiment.hpp"
#include "qbm/model.hpp"
#include "qbm/pimc.hpp"
#include "qbm/scorer.hpp"

namespace py = pybind11;
using namespace qbm;

namespace {

using SpinArray = py::array_t<std::int8_t, py::array::c_style | py::array::forcecast>;
using PixelArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

SpinArray spins_to_array(const std::vector<SpinVector>& rows) {
    const std::size_t n = rows.empty() ? 0 : rows.front().size();
    SpinArray out({rows.size(), n});
    auto m = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            m(i, j) = rows[i][j];
        }
    }
    return out;
}

std::vector<SpinVector> array_to_spins(const SpinArray& a) {
    if (a.ndim() != 2) {
        throw Error(ErrorCode::dimension_mismatch, "expected a 2-D spin array");
    }
    auto m = a.unchecked<2>();
    std::vector<SpinVector> rows(static_cast<std::size_t>(m.shape(0)));
    for (py::ssize_t i = 0; i < m.shape(0); ++i) {
        rows[static_cast<std::size_t>(i)].assign(&m(i, 0), &m(i, 0) + m.shape(1));
    }
    return rows;
}

// Images travel as (n, q, p) uint8 arrays: one row-major image per entry.
PixelArray images_to_array(const std::vector<BxsImage>& images) {
    const auto h = images.empty() ? 0 : images.front().height();
    const auto w = images.empty() ? 0 : images.front().width();
    PixelArray out({static_cast<py::ssize_t>(images.size()), static_cast<py::ssize_t>(h), static_cast<py::ssize_t>(w)});
    auto* dst = out.mutable_data();
    for (const auto& img : images) {
        dst = std::copy(img.pixels().begin(), img.pixels().end(), dst);
    }
    return out;
}

std::vector<BxsImage> array_to_images(const PixelArray& a) {
    if (a.ndim() != 3) {
        throw Error(ErrorCode::dimension_mismatch, "expected an (n, height, width) image array");
    }
    const auto n = a.shape(0), h = a.shape(1), w = a.shape(2);
    std::vector<BxsImage> images;
    images.reserve(static_cast<std::size_t>(n));
    const auto* src = a.data();
    for (py::ssize_t i = 0; i < n; ++i, src += h * w) {
        images.emplace_back(static_cast<int>(w), static_cast<int>(h), std::vector<std::uint8_t>(src, src + h * w));
    }
    return images;
}

Dataset to_dataset(const PixelArray& a) {
    auto images = array_to_images(a);
    return {static_cast<int>(a.shape(2)), static_cast<int>(a.shape(1)), std::move(images)};
}

py::dict stats_dict(const PhaseStats& s) {
    py::dict d;
    d["units"] = s.units;
    d["edges"] = s.edges;
    return d;
}

PhaseStats dict_stats(const py::dict& d) {
    return {d["units"].cast<Eigen::VectorXd>(), d["edges"].cast<Eigen::MatrixXd>()};
}

py::object json_to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json py_to_json(const py::object& o) {
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

SamplerConfig sampler_config(std::size_t replicas, int slices, int anneal_steps, int sweeps, std::uint64_t seed,
                             unsigned threads) {
    SamplerConfig c;
    c.replicas = replicas;
    c.slices = slices;
    c.schedule = AnnealSchedule::linear(anneal_steps);
    c.sweeps = sweeps;
    c.seed = seed;
    c.threads = threads;
    return c;
}

} // namespace

PYBIND11_MODULE(_qbm, m) {
    m.doc() = "Quantum Boltzmann machine training on bars-and-stripes images";

    static py::exception<Error> error_type(m, "QbmError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) {
                std::rethrow_exception(p);
            }
        } catch (const Error& e) {
            py::object err = error_type;
            err.attr("code") = to_string(e.code());
            PyErr_SetString(error_type.ptr(), e.what());
        }
    });

    // dataset
    m.def("generate_bxs", [](int p, int q) { return images_to_array(generate_bxs_multiset(p, q).images()); },
          py::arg("p") = 6, py::arg("q") = 6, "All 2^(p+q) BXS images (duplicates kept) as an (n, q, p) array.");
    m.def("is_bxs", [](const PixelArray& a) {
        auto images = array_to_images(a);
        std::vector<bool> out;
        for (const auto& img : images) {
            out.push_back(is_bxs(img));
        }
        return out;
    });
    m.def("distinct_count", [](const PixelArray& a) { return distinct_count(to_dataset(a)); });
    m.def("encode_spins", [](const PixelArray& a) {
        std::vector<SpinVector> rows;
        for (const auto& img : array_to_images(a)) {
            rows.push_back(encode_spins(img));
        }
        return spins_to_array(rows);
    });

    // model
    py::class_<QbmParams>(m, "QbmParams")
        .def(py::init<double, Eigen::VectorXd, Eigen::VectorXd, Eigen::MatrixXd>(), py::arg("gamma"),
             py::arg("visible_bias"), py::arg("hidden_bias"), py::arg("weights"))
        .def_static("zeros", &QbmParams::zeros)
        .def_readwrite("gamma", &QbmParams::gamma)
        .def_readwrite("visible_bias", &QbmParams::visible_bias)
        .def_readwrite("hidden_bias", &QbmParams::hidden_bias)
        .def_readwrite("weights", &QbmParams::weights)
        .def_property_readonly("n_visible", &QbmParams::n_visible)
        .def_property_readonly("n_hidden", &QbmParams::n_hidden);

    m.def("init_params",
          [](const PixelArray& images, int n_hidden, double gamma, std::uint64_t seed) {
              return init_params(to_dataset(images), n_hidden, gamma, seed);
          },
          py::arg("images"), py::arg("n_hidden"), py::arg("gamma") = 2.0, py::arg("seed") = 0);
    m.def("clamped_expectation", &clamped_expectation, py::arg("gamma"), py::arg("b_eff"));
    m.def("positive_phase_hidden", [](const QbmParams& params, const SpinVector& v) {
        return positive_phase_hidden(params, v);
    });
    m.def("clamped_phase_stats",
          [](const QbmParams& params, const SpinArray& batch, std::vector<double> weights) {
              const auto rows = array_to_spins(batch);
              return stats_dict(weights.empty() ? clamped_phase_stats(params, rows)
                                                : clamped_phase_stats(params, rows, weights));
          },
          py::arg("params"), py::arg("batch"), py::arg("weights") = std::vector<double>{});
    m.def("likelihood_gradient",
          [](const py::dict& pos, const py::dict& neg) { return likelihood_gradient(dict_stats(pos), dict_stats(neg)); });

    // sampler
    m.def("sample_gibbs",
          [](const QbmParams& params, std::size_t replicas, int slices, int anneal_steps, int sweeps,
             std::uint64_t seed, unsigned threads) {
              py::gil_scoped_release release;
              auto samples = sample_gibbs(params, sampler_config(replicas, slices, anneal_steps, sweeps, seed, threads));
              py::gil_scoped_acquire acquire;
              return spins_to_array(samples);
          },
          py::arg("params"), py::arg("replicas") = 128, py::arg("slices") = 10, py::arg("anneal_steps") = 5,
          py::arg("sweeps") = 10, py::arg("seed") = 0, py::arg("threads") = 1);
    m.def("negative_phase", [](const SpinArray& samples, int n_visible) {
        return stats_dict(negative_phase(array_to_spins(samples), n_visible));
    });

    // oracle
    m.def("exact_model_stats",
          [](const QbmParams& params, double beta) { return stats_dict(exact::exact_model_stats(params, beta)); },
          py::arg("params"), py::arg("beta") = 1.0);
    m.def("clamped_hidden_oracle", [](const QbmParams& params, const SpinVector& v) {
        return exact::clamped_hidden_oracle(params, v);
    });
    m.def("visible_distribution", [](const QbmParams& params, double beta) {
        return exact::visible_distribution(exact::gibbs_density(exact::build_hamiltonian(params), beta),
                                           params.n_visible());
    }, py::arg("params"), py::arg("beta") = 1.0);
    m.def("kl_divergence", [](const std::vector<double>& p, const std::vector<double>& q) {
        return exact::kl_divergence(p, q);
    });

    // scorer
    py::class_<ScorerNet>(m, "ScorerNet")
        .def(py::init<int, int>(), py::arg("input_dim"), py::arg("hidden_width") = 32)
        .def_property_readonly("dims", &ScorerNet::dims)
        .def("parameters", &ScorerNet::parameters)
        .def("set_parameters", &ScorerNet::set_parameters)
        .def("classify", [](const ScorerNet& net, const PixelArray& images) {
            const Eigen::RowVectorXd z = net.logits(image_matrix(array_to_images(images)));
            return Eigen::RowVectorXd((1.0 + (-z.array()).exp()).inverse());
        })
        .def("embed", [](const ScorerNet& net, const PixelArray& images) {
            return Eigen::MatrixXd(net.embeddings(image_matrix(array_to_images(images))).transpose());
        })
        .def("to_json", [](const ScorerNet& net) { return json_to_py(to_json(net, nlohmann::json::object())); })
        .def_static("from_json", [](const py::object& o) { return scorer_from_json(py_to_json(o)); });

    m.def("train_scorer",
          [](int p, int q, std::size_t size, std::uint64_t seed, int epochs) {
              py::gil_scoped_release release;
              const auto [train, val] = make_labeled_set(p, q, size, seed);
              ScorerTrainOptions opt;
              opt.epochs = epochs;
              ScorerReport report;
              auto net = train_scorer(train, val, seed, opt, &report);
              return std::make_pair(std::move(net), report.validation_accuracy);
          },
          py::arg("p") = 6, py::arg("q") = 6, py::arg("size") = kDefaultLabeledSetSize, py::arg("seed") = 0,
          py::arg("epochs") = ScorerTrainOptions{}.epochs,
          "Returns (net, validation_accuracy); raises QbmError if the accuracy target is missed.");
    m.def("model_score", [](const ScorerNet& net, const SpinArray& samples, int p, int q) {
        return model_score(net, array_to_spins(samples), p, q);
    });

    // coresets
    m.def("uniform_coreset", [](const PixelArray& images, std::size_t m_, std::uint64_t seed) {
        return images_to_array(uniform_coreset(to_dataset(images), m_, seed).points());
    });
    m.def("minimax_coreset",
          [](const PixelArray& images, std::size_t m_, const ScorerNet* net) {
              const Dataset data = to_dataset(images);
              const auto features =
                  net != nullptr ? embedding_features(*net, data.images()) : pixel_features(data.images());
              return images_to_array(minimax_coreset(data, m_, features).points());
          },
          py::arg("images"), py::arg("m"), py::arg("scorer") = nullptr,
          "Greedy k-center in scorer-embedding space, or pixel space without a scorer.");
    m.def("greedy_k_center",
          [](const Eigen::MatrixXd& dist, std::size_t m_, std::size_t first) {
              const auto r = greedy_k_center(static_cast<std::size_t>(dist.rows()), m_,
                                             [&](std::size_t i, std::size_t j) {
                                                 return dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                                             },
                                             first);
              return std::make_pair(r.centers, r.radius);
          },
          py::arg("distances"), py::arg("m"), py::arg("first") = 0);

    // experiment
    m.def("run_experiment",
          [](const py::object& config, const ScorerNet& scorer) {
              const ExperimentConfig cfg = config_from_json(py_to_json(config));
              ExperimentResult result;
              {
                  py::gil_scoped_release release;
                  result = run_experiment(cfg, scorer);
              }
              py::dict curves;
              for (const auto& c : result.curves) {
                  py::dict d;
                  d["mean"] = c.mean;
                  d["std"] = c.stddev;
                  d["n_seeds"] = c.n_seeds;
                  curves[py::str(to_string(c.arm))] = d;
              }
              return curves;
          },
          py::arg("config"), py::arg("scorer"), "Runs every arm and seed; returns per-arm score curves.");
    m.def("verify_oracles", [](std::uint64_t seed) {
        std::vector<std::tuple<std::string, bool, std::string>> out;
        for (const auto& c : verify_oracles(seed)) {
            out.emplace_back(c.name, c.passed, c.detail);
        }
        return out;
    }, py::arg("seed") = 0);
}
