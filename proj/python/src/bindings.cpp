#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kgfuse/cli.hpp"
#include "kgfuse/corpus.hpp"
#include "kgfuse/embedder.hpp"
#include "kgfuse/evalkit.hpp"
#include "kgfuse/gate.hpp"
#include "kgfuse/graph_store.hpp"
#include "kgfuse/retrieval.hpp"
#include "kgfuse/vector_index.hpp"

namespace py = pybind11;
using namespace kgfuse;

namespace {

py::dict chunk_to_dict(const corpus::Chunk& chunk) {
  py::dict d;
  d["chunk_id"] = chunk.chunk_id;
  d["doc_id"] = chunk.doc_id;
  d["index"] = chunk.index;
  d["text"] = chunk.text;
  d["pos"] = chunk.pos;
  d["overlap_len"] = chunk.overlap_len;
  d["struct_label"] = corpus::to_string(chunk.struct_label);
  d["heading_level"] = chunk.heading_level;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Knowledge-graph construction and hybrid retrieval engine";

  m.def(
      "chunk_document",
      [](const std::string& text, const std::string& doc_id, const std::string& strategy,
         size_t chunk_size, size_t chunk_overlap) {
        corpus::Document doc{doc_id, doc_id, text, ""};
        corpus::ChunkerConfig config{corpus::strategy_from_string(strategy), chunk_size,
                                     chunk_overlap};
        py::list out;
        for (const auto& chunk : corpus::chunk_document(doc, config)) {
          out.append(chunk_to_dict(chunk));
        }
        return out;
      },
      py::arg("text"), py::arg("doc_id") = "doc", py::arg("strategy") = "STRUCTURAL",
      py::arg("chunk_size") = 800, py::arg("chunk_overlap") = 0);

  m.def(
      "quality_gate",
      [](const std::string& name) {
        toolkit::GateResult result = toolkit::quality_gate(name);
        return py::make_tuple(result.pass,
                              result.pass ? py::object(py::none())
                                          : py::object(py::str(toolkit::to_string(*result.rule))));
      },
      py::arg("name"), "Returns (passed, first_violated_rule_or_None)");

  m.def("answer_f1", &eval::answer_f1, py::arg("pred"), py::arg("gold"));
  m.def(
      "evidence_f1",
      [](const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
        return eval::evidence_f1({pred.begin(), pred.end()}, {gold.begin(), gold.end()});
      },
      py::arg("pred"), py::arg("gold"));
  m.def("tokenize", &eval::tokenize, py::arg("text"));

  m.def(
      "rrf_fuse",
      [](const std::vector<std::string>& vector_stream, const std::vector<std::string>& kg_stream,
         double k) {
        py::list out;
        for (const auto& candidate : retrieval::rrf_fuse(vector_stream, kg_stream, k)) {
          py::dict d;
          d["object_id"] = candidate.object_id;
          d["rank_vec"] = candidate.rank_vec == retrieval::kMiss
                              ? py::object(py::none())
                              : py::object(py::int_(candidate.rank_vec));
          d["rank_kg"] = candidate.rank_kg == retrieval::kMiss
                             ? py::object(py::none())
                             : py::object(py::int_(candidate.rank_kg));
          d["rrf_score"] = candidate.rrf_score;
          out.append(d);
        }
        return out;
      },
      py::arg("vector_stream"), py::arg("kg_stream"), py::arg("k") = 60.0);

  py::class_<vec::NgramEmbedder>(m, "NgramEmbedder")
      .def(py::init<size_t>(), py::arg("dimension") = 64)
      .def("embed", &vec::NgramEmbedder::embed, py::arg("text"))
      .def_property_readonly("dimension", &vec::NgramEmbedder::dimension);

  m.def("cosine", &vec::cosine, py::arg("a"), py::arg("b"));

  m.def(
      "cli",
      [](const std::vector<std::string>& args) { return cli::run(args); },
      py::arg("args"),
      "Runs a CLI command in-process (ingest/build/query/trace/check/eval/schemas); "
      "returns the exit code.");
}
