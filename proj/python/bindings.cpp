#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "copyscope/ablation.hpp"
#include "copyscope/error.hpp"
#include "copyscope/fid.hpp"
#include "copyscope/game.hpp"
#include "copyscope/image.hpp"
#include "copyscope/metrics.hpp"
#include "copyscope/version.hpp"

namespace py = pybind11;
using namespace copyscope;

namespace {

Image image_from_array(py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> arr) {
    const auto info = arr.request();
    if (info.ndim != 2 && info.ndim != 3) throw py::value_error("image array must be (H, W) or (H, W, 3)");
    const int h = static_cast<int>(info.shape[0]);
    const int w = static_cast<int>(info.shape[1]);
    const int c = info.ndim == 2 ? 1 : static_cast<int>(info.shape[2]);
    const auto* p = static_cast<const std::uint8_t*>(info.ptr);
    return Image(w, h, c, std::vector<std::uint8_t>(p, p + static_cast<std::size_t>(info.size)));
}

py::array_t<std::uint8_t> image_to_array(const Image& img) {
    std::vector<py::ssize_t> shape{img.height(), img.width()};
    if (img.channels() == 3) shape.push_back(3);
    py::array_t<std::uint8_t> out(shape);
    std::copy(img.data().begin(), img.data().end(), out.mutable_data());
    return out;
}

MetricOptions options(std::optional<int> resolution) {
    MetricOptions o;
    o.resolution = resolution;
    return o;
}

// Keys are iterables of player ids or ';'-joined strings.
ValueTable table_from_dict(const std::vector<std::string>& players, const py::dict& values,
                           const std::string& orientation, const std::string& baseline) {
    std::vector<Player> ps;
    for (const auto& id : players) ps.push_back({id, std::nullopt});
    ValueTable table(std::move(ps), parse_orientation(orientation), baseline);
    for (const auto& [key, value] : values) {
        Coalition c;
        if (py::isinstance<py::str>(key)) {
            c = Coalition::parse(key.cast<std::string>());
        } else {
            c = Coalition(key.cast<std::vector<std::string>>());
        }
        table.set(c, value.cast<double>());
    }
    return table;
}

py::dict result_dict(const AttributionResult& r) {
    py::dict d;
    py::dict values;
    py::dict normalized;
    for (std::size_t i = 0; i < r.players.size(); ++i) {
        values[py::str(r.players[i])] = r.values[i];
        if (!r.normalized.empty()) normalized[py::str(r.players[i])] = r.normalized[i];
    }
    d["method"] = std::string(to_string(r.method));
    d["values"] = values;
    d["normalized"] = normalized;
    d["normalization"] = std::string(to_string(r.normalization));
    d["ranking"] = r.ranking;
    if (!r.std_error.empty()) {
        py::dict se;
        for (std::size_t i = 0; i < r.players.size(); ++i) se[py::str(r.players[i])] = r.std_error[i];
        d["std_error"] = se;
    }
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Image-similarity metrics, FID and coalition attribution";
    m.attr("__version__") = kVersion;

    static py::exception<Error> exc(m, "CopyscopeError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(exc, (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
        }
    });

    py::class_<Image>(m, "Image")
        .def(py::init(&image_from_array), py::arg("array"))
        .def_property_readonly("width", &Image::width)
        .def_property_readonly("height", &Image::height)
        .def_property_readonly("channels", &Image::channels)
        .def("to_numpy", &image_to_array)
        .def("__eq__", [](const Image& a, const Image& b) { return a == b; });

    py::class_<ImageSet>(m, "ImageSet")
        .def_readonly("images", &ImageSet::images)
        .def_readonly("labels", &ImageSet::labels)
        .def("__len__", &ImageSet::size);

    m.def("load_image", &load_image, py::arg("path"));
    m.def("load_image_set", &load_image_set, py::arg("dir"), py::arg("threads") = 1);
    m.def("save_png", &save_png, py::arg("image"), py::arg("path"));
    m.def("to_grayscale", &to_grayscale, py::arg("image"));
    m.def("resize", &resize, py::arg("image"), py::arg("width"), py::arg("height"));

    m.def("cosine_similarity", [](const Image& a, const Image& b, std::optional<int> r) {
        return cosine_similarity(a, b, options(r));
    }, py::arg("a"), py::arg("b"), py::arg("resolution") = kDefaultMetricResolution);
    m.def("hist_similarity", [](const Image& a, const Image& b, std::optional<int> r) {
        return hist_similarity(a, b, options(r));
    }, py::arg("a"), py::arg("b"), py::arg("resolution") = kDefaultMetricResolution);
    m.def("ssim", [](const Image& a, const Image& b, std::optional<int> r) { return ssim(a, b, options(r)); },
          py::arg("a"), py::arg("b"), py::arg("resolution") = kDefaultMetricResolution);
    m.def("rgb_ssim", [](const Image& a, const Image& b, std::optional<int> r) { return rgb_ssim(a, b, options(r)); },
          py::arg("a"), py::arg("b"), py::arg("resolution") = kDefaultMetricResolution);
    m.def("dhash", &dhash, py::arg("image"));
    m.def("dhash_similarity", &dhash_similarity, py::arg("a"), py::arg("b"));

    m.def("fit_gaussian", [](const Eigen::MatrixXd& x) {
        FeatureSet fs;
        fs.matrix = x;
        const auto st = fit_gaussian(fs);
        return py::make_tuple(st.mean, st.cov);
    }, py::arg("features"));
    m.def("matrix_sqrt_psd", &matrix_sqrt_psd, py::arg("matrix"));
    m.def("fid", [](const Eigen::VectorXd& mu_r, const Eigen::MatrixXd& cov_r, const Eigen::VectorXd& mu_g,
                    const Eigen::MatrixXd& cov_g) {
        return fid(GaussianStats{mu_r, cov_r, 0}, GaussianStats{mu_g, cov_g, 0});
    }, py::arg("mu_real"), py::arg("cov_real"), py::arg("mu_gen"), py::arg("cov_gen"));
    m.def("fid_features", [](const Eigen::MatrixXd& real, const Eigen::MatrixXd& gen) {
        FeatureSet a;
        a.matrix = real;
        FeatureSet b;
        b.matrix = gen;
        return fid_between_sets(a, b).value;
    }, py::arg("real"), py::arg("gen"));
    m.def("read_feature_file", [](const std::filesystem::path& p) {
        const auto fs = load_features(p);
        return py::make_tuple(fs.matrix, fs.labels, fs.source_tag);
    }, py::arg("path"));
    m.def("write_feature_file", [](const std::filesystem::path& p, const Eigen::MatrixXd& x,
                                   const std::vector<std::string>& labels) {
        FeatureSet fs;
        fs.matrix = x;
        fs.labels = labels;
        write_feature_file(fs, p);
    }, py::arg("path"), py::arg("features"), py::arg("labels"));

    py::class_<ValueTable>(m, "ValueTable")
        .def(py::init(&table_from_dict), py::arg("players"), py::arg("values"),
             py::arg("orientation") = "LowerIsBetter", py::arg("baseline") = "baseline")
        .def_property_readonly("players", &ValueTable::player_ids)
        .def("utility", [](const ValueTable& t, const std::vector<std::string>& members) {
            return t.utility(Coalition(members));
        }, py::arg("members"))
        .def("raw", [](const ValueTable& t, const std::vector<std::string>& members) {
            return t.raw(Coalition(members));
        }, py::arg("members"))
        .def("complete", &ValueTable::complete);

    m.def("load_value_table", [](const std::filesystem::path& p, const std::string& orientation,
                                 const std::string& baseline) {
        return load_value_table(p, parse_orientation(orientation), baseline);
    }, py::arg("path"), py::arg("orientation") = "LowerIsBetter", py::arg("baseline") = "baseline");

    m.def("shapley_exact", [](const ValueTable& t, const std::string& norm) {
        return result_dict(normalize(shapley_exact(t), parse_normalization(norm)));
    }, py::arg("table"), py::arg("norm") = "share");
    m.def("shapley_sampled", [](const ValueTable& t, std::uint64_t perms, std::uint64_t seed, unsigned threads) {
        return result_dict(shapley_sampled(t, perms, seed, threads));
    }, py::arg("table"), py::arg("permutations"), py::arg("seed") = 0, py::arg("threads") = 1);
    m.def("loo", [](const ValueTable& t, const std::string& norm) {
        return result_dict(normalize(loo(t), parse_normalization(norm)));
    }, py::arg("table"), py::arg("norm") = "share");
    m.def("check_axioms", [](const ValueTable& t) {
        const auto rep = check_axioms(t, shapley_exact(t));
        py::dict d;
        d["efficiency"] = rep.efficiency;
        d["null_player"] = rep.null_player;
        d["symmetry"] = rep.symmetry;
        d["null_players"] = rep.null_players;
        d["value_sum"] = rep.value_sum;
        d["grand_utility"] = rep.grand_utility;
        return d;
    }, py::arg("table"));
    m.def("ablate", [](const ValueTable& t) {
        const auto rep = ablate(t);
        py::list entries;
        for (const auto& e : rep.entries) {
            py::dict d;
            d["player"] = e.player;
            d["mean_raw_without"] = e.mean_raw_without;
            d["deviation"] = e.deviation;
            entries.append(d);
        }
        py::dict out;
        out["grand_raw"] = rep.grand_raw;
        out["entries"] = entries;
        return out;
    }, py::arg("table"));
}
