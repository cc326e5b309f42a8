#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "gtr/errors.hpp"
#include "gtr/evaluation.hpp"
#include "gtr/gtr_inference.hpp"
#include "gtr/import_analysis.hpp"
#include "gtr/pipeline.hpp"
#include "gtr/seq_model.hpp"
#include "gtr/source_model.hpp"
#include "gtr/synthetic.hpp"
#include "gtr/type_lang.hpp"

namespace py = pybind11;
using namespace gtr;

namespace {

// Accepts {name: "SameFile" | "Imported"} or any iterable of names.
VisibleTypeSet to_visible(const py::object& obj) {
  VisibleTypeSet v;
  if (obj.is_none()) return v;
  if (py::isinstance<py::dict>(obj)) {
    for (const auto& [k, p] : obj.cast<py::dict>()) {
      const auto origin = p.cast<std::string>();
      if (origin != "SameFile" && origin != "Imported") throw py::value_error("unknown provenance " + origin);
      v.add(k.cast<std::string>(), origin == "SameFile" ? Provenance::SameFile : Provenance::Imported);
    }
    return v;
  }
  for (const auto& name : obj) v.add(name.cast<std::string>(), Provenance::Imported);
  return v;
}

py::dict from_visible(const VisibleTypeSet& v) {
  py::dict d;
  for (const auto& [name, p] : v.provenance) d[py::str(name)] = to_string(p);
  return d;
}

const char* origin_name(CandidateOrigin o) { return o == CandidateOrigin::Generated ? "generated" : "visible"; }

py::list candidates_to_list(const RankedPrediction& r) {
  py::list out;
  for (const auto& c : r.candidates) {
    py::dict d;
    d["type"] = c.text;
    d["origin"] = origin_name(c.origin);
    d["lik"] = c.lik;
    d["sim"] = c.sim;
    d["score"] = c.score;
    out.append(d);
  }
  return out;
}

py::object json_to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Generate-then-rank type inference for Python functions";

  auto error = py::register_exception<Error>(m, "Error");
  py::register_exception<ParseError>(m, "ParseError", error);
  py::register_exception<SlotNotFound>(m, "SlotNotFound", error);
  py::register_exception<FileNotIndexed>(m, "FileNotIndexed", error);
  py::register_exception<EmptyPool>(m, "EmptyPool", error);
  py::register_exception<CheckpointError>(m, "CheckpointError", error);
  py::register_exception<MissingPrerequisite>(m, "MissingPrerequisite", error);
  py::register_exception<ConfigError>(m, "ConfigError", error);

  // ---- types ----
  py::class_<TypeExpr>(m, "TypeExpr")
      .def_readonly("base", &TypeExpr::base)
      .def_readonly("params", &TypeExpr::params)
      .def("is_atomic", &TypeExpr::is_atomic)
      .def("__str__", [](const TypeExpr& t) { return render(t); })
      .def("__repr__", [](const TypeExpr& t) { return "TypeExpr('" + render(t) + "')"; })
      .def("__eq__", [](const TypeExpr& a, const TypeExpr& b) { return a == b; });

  m.def("parse_type", &parse_type, py::arg("text"));
  m.def("normalize", &normalize, py::arg("type"));
  m.def("canonical_text", [](const std::string& s) { return canonical_text(s); }, py::arg("text"));
  m.def("classify", [](const std::string& s) { return std::string(to_string(classify(parse_type(s)))); },
        py::arg("text"));
  m.def("is_builtin_name", [](const std::string& s) { return is_builtin_name(s); }, py::arg("name"));
  m.def(
      "match",
      [](const std::string& pred, const std::string& gold) {
        const auto r = match(parse_type(pred), parse_type(gold));
        return py::make_tuple(r.exact, r.base);
      },
      py::arg("pred"), py::arg("gold"), "(exact, base) match of two type texts");

  // ---- source model ----
  py::class_<PythonFunction>(m, "PythonFunction")
      .def(py::init<>())
      .def_readwrite("file_path", &PythonFunction::file_path)
      .def_readwrite("name", &PythonFunction::name)
      .def_readwrite("source_text", &PythonFunction::source_text)
      .def_readwrite("line_span", &PythonFunction::line_span)
      .def("__repr__", [](const PythonFunction& f) { return "PythonFunction(" + f.file_path + ":" + f.name + ")"; });

  py::class_<TypeSlot>(m, "TypeSlot")
      .def(py::init([](const std::string& kind, const std::string& name, int occurrence) {
             return TypeSlot{var_kind_from_string(kind), name, occurrence};
           }),
           py::arg("var_kind"), py::arg("var_name") = "", py::arg("occurrence_index") = 0)
      .def_property_readonly("var_kind", [](const TypeSlot& s) { return std::string(to_string(s.var_kind)); })
      .def_readonly("var_name", &TypeSlot::var_name)
      .def_readonly("occurrence_index", &TypeSlot::occurrence_index)
      .def("__eq__", [](const TypeSlot& a, const TypeSlot& b) { return a == b; })
      .def("__repr__", [](const TypeSlot& s) {
        return std::string("TypeSlot(") + to_string(s.var_kind) + ", '" + s.var_name + "')";
      });

  py::class_<TypeMissedFunction>(m, "TypeMissedFunction")
      .def_readonly("function", &TypeMissedFunction::function)
      .def_readonly("slot", &TypeMissedFunction::slot)
      .def_property_readonly("text", [](const TypeMissedFunction& f) { return f.function.source_text; });

  py::class_<TrainingPair>(m, "TrainingPair")
      .def_readonly("input", &TrainingPair::input)
      .def_readonly("expected_type", &TrainingPair::expected_type)
      .def_property_readonly("category", [](const TrainingPair& p) { return std::string(to_string(p.category)); });

  m.def(
      "extract_functions",
      [](const std::string& source, const std::string& path) {
        auto r = extract_functions(source, path);
        py::list diags;
        for (const auto& d : r.diagnostics) diags.append(py::make_tuple(d.file_path, d.error));
        return py::make_tuple(r.functions, diags);
      },
      py::arg("source_text"), py::arg("file_path") = "", "(functions, [(file_path, error)])");
  m.def("enumerate_slots", &enumerate_slots, py::arg("function"));
  m.def("insert_placeholder", &insert_placeholder, py::arg("function"), py::arg("slot"));
  m.def("mask_annotations", &mask_annotations, py::arg("function"));
  m.def(
      "substitute_placeholder", [](const std::string& text, const std::string& type) {
        return substitute_placeholder(text, type);
      },
      py::arg("masked_text"), py::arg("type_text"));

  // ---- imports ----
  py::class_<ProjectIndex>(m, "ProjectIndex")
      .def_property_readonly("files",
                             [](const ProjectIndex& p) {
                               std::vector<std::string> out;
                               for (const auto& [f, _] : p.files) out.push_back(f);
                               return out;
                             })
      .def("to_json", [](const ProjectIndex& p) { return json_to_py(to_json(p)); });

  m.def("index_project", &index_project, py::arg("root"));
  m.def("index_sources", &index_sources, py::arg("sources"));
  m.def(
      "visible_types", [](const ProjectIndex& p, const std::string& file) { return from_visible(visible_types(p, file)); },
      py::arg("index"), py::arg("file"));

  // ---- models and inference ----
  py::class_<SeqModelParams>(m, "Model")
      .def_static("load", &load_checkpoint, py::arg("path"))
      .def("save", [](const SeqModelParams& p, const std::filesystem::path& path) { save_checkpoint(p, path); })
      .def_property_readonly("vocab_size", [](const SeqModelParams& p) { return p.vocab.size(); })
      .def_property_readonly("d_model", [](const SeqModelParams& p) { return p.dims.d_model; });

  m.def(
      "generate_candidates",
      [](const SeqModelParams& gen, const TypeMissedFunction& f, int k) { return generate_candidates(gen, f, k); },
      py::arg("gen"), py::arg("func"), py::arg("k") = 5);
  m.def(
      "likelihood",
      [](const SeqModelParams& p, const TypeMissedFunction& f, const std::string& t) { return likelihood(p, f, t); },
      py::arg("gen"), py::arg("func"), py::arg("type_text"));
  m.def(
      "similarity",
      [](const SeqModelParams& p, const TypeMissedFunction& f, const std::string& t) { return similarity(p, f, t); },
      py::arg("sim"), py::arg("func"), py::arg("type_text"));
  m.def(
      "build_pool",
      [](const std::vector<std::string>& generated, const py::object& visible) {
        py::list out;
        for (const auto& e : build_pool(generated, to_visible(visible)))
          out.append(py::make_tuple(e.text, origin_name(e.origin)));
        return out;
      },
      py::arg("generated"), py::arg("visible") = py::none(), "[(type, origin)]");
  m.def(
      "predict",
      [](const SeqModelParams& gen, const SeqModelParams& simm, const TypeMissedFunction& f, const py::object& visible,
         const std::string& mode, int k) {
        return candidates_to_list(predict(gen, simm, f, to_visible(visible), inference_mode_from_string(mode), k));
      },
      py::arg("gen"), py::arg("sim"), py::arg("func"), py::arg("visible") = py::none(), py::arg("mode") = "full",
      py::arg("k") = 5, "Ranked candidates as dicts with type, origin, lik, sim and score");

  // ---- evaluation ----
  m.def(
      "evaluate",
      [](const std::vector<py::dict>& rows, const std::vector<int>& ks) {
        std::vector<EvalInstance> inst;
        for (const auto& r : rows) {
          EvalInstance e;
          e.gold = parse_type(r["gold"].cast<std::string>());
          for (const auto& t : r["ranked"].cast<std::vector<std::string>>())
            e.prediction.candidates.push_back(Candidate{parse_type(t), t, CandidateOrigin::Generated, 0, 0, 0});
          e.type_category = r.contains("category") ? category_from_string(r["category"].cast<std::string>())
                                                   : classify(e.gold);
          e.var_kind = r.contains("var_kind") ? var_kind_from_string(r["var_kind"].cast<std::string>()) : VarKind::Local;
          e.unseen = r.contains("unseen") && r["unseen"].cast<bool>();
          inst.push_back(std::move(e));
        }
        return json_to_py(report_to_json(evaluate(inst, ks)));
      },
      py::arg("rows"), py::arg("ks") = std::vector<int>{1, 3, 5},
      "rows: dicts with gold, ranked and optional category, var_kind, unseen");

  // ---- pipeline ----
  m.def(
      "run_demo",
      [](const std::filesystem::path& workdir, std::uint64_t seed) {
        RunConfig config = demo_config();
        config.workdir = workdir;
        config.seed = seed;
        std::ostringstream out, log;
        {
          py::gil_scoped_release release;
          run_demo(config, out, log);
        }
        return out.str();
      },
      py::arg("workdir"), py::arg("seed") = 0, "Runs the synthetic end-to-end demo and returns the printed reports");
  m.def(
      "generate_synthetic_corpus",
      [](std::uint64_t seed, int train_projects, int test_projects, int functions_per_project) {
        SyntheticOptions o;
        o.seed = seed;
        o.train_projects = train_projects;
        o.test_projects = test_projects;
        o.functions_per_project = functions_per_project;
        o.projects_with_unseen = std::min(o.projects_with_unseen, test_projects);
        return generate_synthetic_corpus(o).files;
      },
      py::arg("seed") = 0, py::arg("train_projects") = 36, py::arg("test_projects") = 8,
      py::arg("functions_per_project") = 48, "{relative path: source}");
}
