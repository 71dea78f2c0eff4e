#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "projcluster/augment.hpp"
#include "projcluster/cli.hpp"
#include "projcluster/eval.hpp"
#include "projcluster/ingest.hpp"
#include "projcluster/segment.hpp"
#include "projcluster/synth.hpp"

namespace py = pybind11;
using namespace projcluster;

namespace {

std::string box_repr(const BBox& b) {
  std::ostringstream s;
  s << "BBox(x=" << b.x << ", y=" << b.y << ", w=" << b.w << ", h=" << b.h << ")";
  return s.str();
}

// Projection image from a 2-D array of per-cell counts.
ProjectionImage projection_from(py::array_t<std::uint16_t, py::array::c_style | py::array::forcecast> counts,
                                int window_length) {
  if (counts.ndim() != 2) throw py::value_error("counts must be a 2-D array");
  ProjectionImage pi({static_cast<int>(counts.shape(1)), static_cast<int>(counts.shape(0))}, window_length);
  std::copy(counts.data(), counts.data() + counts.size(), pi.counts.begin());
  return pi;
}

}  // namespace

PYBIND11_MODULE(_projcluster, m) {
  m.doc() = "Temporal projection, ISODATA clustering and evaluation for hand detections";

  py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<NoContrastError>(m, "NoContrastError", PyExc_ValueError);
  py::register_exception<UndefinedMetricError>(m, "UndefinedMetricError", PyExc_ValueError);

  py::class_<BBox>(m, "BBox")
      .def(py::init<>())
      .def(py::init([](int x, int y, int w, int h) { return BBox{x, y, w, h}; }), py::arg("x"),
           py::arg("y"), py::arg("w"), py::arg("h"))
      .def_readwrite("x", &BBox::x)
      .def_readwrite("y", &BBox::y)
      .def_readwrite("w", &BBox::w)
      .def_readwrite("h", &BBox::h)
      .def_property_readonly("area", &BBox::area)
      .def(py::self == py::self)
      .def("__repr__", &box_repr);

  py::class_<FrameGeometry>(m, "FrameGeometry")
      .def(py::init([](int w, int h) { return FrameGeometry{w, h}; }), py::arg("width"), py::arg("height"))
      .def_readwrite("width", &FrameGeometry::width)
      .def_readwrite("height", &FrameGeometry::height);

  py::class_<Detection>(m, "Detection")
      .def(py::init([](int frame, BBox box, double score) { return Detection{frame, box, score}; }),
           py::arg("frame_index"), py::arg("box"), py::arg("score"))
      .def_readwrite("frame_index", &Detection::frame_index)
      .def_readwrite("box", &Detection::box)
      .def_readwrite("score", &Detection::score);

  py::class_<DetectionStream>(m, "DetectionStream")
      .def(py::init<>())
      .def_readwrite("session_id", &DetectionStream::session_id)
      .def_readwrite("geometry", &DetectionStream::geometry)
      .def_readwrite("detections", &DetectionStream::detections);

  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_readwrite("window_length_s", &PipelineConfig::window_length_s)
      .def_readwrite("area_threshold_cells", &PipelineConfig::area_threshold_cells)
      .def_readwrite("nms_iou", &PipelineConfig::nms_iou)
      .def_readwrite("score_threshold", &PipelineConfig::score_threshold)
      .def_readwrite("scale", &PipelineConfig::scale)
      .def_readwrite("keep_partial", &PipelineConfig::keep_partial)
      .def_readwrite("duration_s", &PipelineConfig::duration_s)
      .def_readwrite("merge_iou", &PipelineConfig::merge_iou)
      .def_readwrite("threads", &PipelineConfig::threads);

  py::class_<Region>(m, "Region")
      .def_readonly("window_index", &Region::window_index)
      .def_readonly("box", &Region::box)
      .def_readonly("area_cells", &Region::area_cells)
      .def_readonly("mean_count", &Region::mean_count)
      .def_readonly("confidence", &Region::confidence);

  py::class_<RegionSet>(m, "RegionSet")
      .def_readonly("session_id", &RegionSet::session_id)
      .def_readonly("window_index", &RegionSet::window_index)
      .def_readonly("start_s", &RegionSet::start_s)
      .def_readonly("length_s", &RegionSet::length_s)
      .def_readonly("regions", &RegionSet::regions);

  py::class_<ScoredBox>(m, "ScoredBox")
      .def(py::init([](int frame, BBox box, double c) { return ScoredBox{frame, box, c}; }),
           py::arg("frame_index"), py::arg("box"), py::arg("confidence"))
      .def_readwrite("frame_index", &ScoredBox::frame_index)
      .def_readwrite("box", &ScoredBox::box)
      .def_readwrite("confidence", &ScoredBox::confidence);

  m.def("iou", &iou, py::arg("a"), py::arg("b"));
  m.def(
      "nms",
      [](const std::vector<Detection>& dets, double threshold) { return nms(dets, threshold); },
      py::arg("detections"), py::arg("iou_threshold") = 0.5);

  m.def(
      "parse_stream",
      [](const std::string& text, const FrameGeometry& g, double score_threshold) {
        std::istringstream in(text);
        return parse_stream(in, g, score_threshold);
      },
      py::arg("text"), py::arg("geometry"), py::arg("score_threshold") = 0.5,
      "Parses detection records (session, frame, x, y, w, h, score) from a string.");

  m.def(
      "detect_hands",
      [](const DetectionStream& s, const PipelineConfig& cfg) {
        py::gil_scoped_release release;
        return detect_hands(s, cfg);
      },
      py::arg("stream"), py::arg("config") = PipelineConfig{});

  m.def(
      "isodata_threshold",
      [](py::array_t<std::int64_t, py::array::c_style | py::array::forcecast> hist) {
        if (hist.ndim() != 1) throw py::value_error("histogram must be 1-D");
        return isodata_threshold(std::span<const std::int64_t>(hist.data(), static_cast<std::size_t>(hist.size())));
      },
      py::arg("histogram"), "ISODATA threshold of a value histogram (smallest fixpoint).");

  m.def(
      "connected_components",
      [](py::array_t<std::uint16_t, py::array::c_style | py::array::forcecast> counts, int threshold) {
        const ProjectionImage pi = projection_from(counts, 1);
        const ClusterImage ci = connected_components(pi, threshold);
        py::array_t<std::int32_t> labels({counts.shape(0), counts.shape(1)});
        std::copy(ci.labels.begin(), ci.labels.end(), labels.mutable_data());
        return py::make_tuple(labels, ci.component_count);
      },
      py::arg("counts"), py::arg("threshold"),
      "8-connected labels of cells above threshold; returns (labels, count).");

  m.def(
      "average_precision",
      [](const std::vector<ScoredBox>& preds, const std::map<int, std::vector<BBox>>& truth,
         double iou_min) {
        GroundTruthSet gt;
        gt.frames = truth;
        return average_precision(preds, gt, iou_min);
      },
      py::arg("predictions"), py::arg("ground_truth"), py::arg("iou_min") = 0.5);

  m.def("reduction_pct", &reduction_pct, py::arg("baseline_count"), py::arg("ours_count"));

  m.def(
      "occlusion_scene",
      [](std::uint64_t seed, int duration_s) {
        auto scene = synth::generate(synth::occlusion_scene(seed, duration_s));
        return py::make_tuple(scene.stream, scene.ground_truth.frames);
      },
      py::arg("seed") = 42, py::arg("duration_s") = 12,
      "Synthetic three-hand scene; returns (stream, ground truth boxes by frame).");

  m.def(
      "transform_box",
      [](const BBox& box, const std::string& kind, double magnitude, int width, int height) {
        const auto t = augment::parse_transform(kind);
        if (!t) throw py::value_error("unknown transform '" + kind + "'");
        return augment::transform_box(box, *t, magnitude, width, height);
      },
      py::arg("box"), py::arg("kind"), py::arg("magnitude"), py::arg("width"), py::arg("height"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool; returns (exit_code, stdout, stderr).");
}
