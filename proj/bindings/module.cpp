#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sempl/analysis.hpp"
#include "sempl/augmentation.hpp"
#include "sempl/classifier.hpp"
#include "sempl/corpus.hpp"
#include "sempl/errors.hpp"
#include "sempl/evaluation.hpp"
#include "sempl/knowledge.hpp"
#include "sempl/pipeline.hpp"
#include "sempl/templating.hpp"

namespace py = pybind11;
using namespace sempl;

PYBIND11_MODULE(sempl, m) {
  m.doc() = "Knowledge-enhanced event plausibility pipeline (C++ core)";

  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<EnvError>(m, "EnvError", PyExc_RuntimeError);

  // corpus -----------------------------------------------------------------
  py::enum_<DatasetId>(m, "DatasetId")
      .value("PEP3K", DatasetId::PEP3K)
      .value("PAP", DatasetId::PAP)
      .value("OTHER", DatasetId::OTHER);
  py::enum_<Split>(m, "Split")
      .value("train", Split::train)
      .value("dev", Split::dev)
      .value("test", Split::test);
  py::enum_<Origin>(m, "Origin")
      .value("original", Origin::original)
      .value("augmented", Origin::augmented);
  py::enum_<SpanRole>(m, "SpanRole")
      .value("subject", SpanRole::subject)
      .value("object", SpanRole::object);

  py::class_<EventTriple>(m, "EventTriple")
      .def(py::init([](const std::string& s, const std::string& v, const std::string& o) {
             EventTriple t{s, v, o};
             t.validate();
             return t;
           }),
           py::arg("subject"), py::arg("verb"), py::arg("object"))
      .def_readwrite("subject", &EventTriple::subject)
      .def_readwrite("verb", &EventTriple::verb)
      .def_readwrite("object", &EventTriple::object)
      .def("__repr__", [](const EventTriple& t) {
        return "(" + t.subject + ", " + t.verb + ", " + t.object + ")";
      });

  py::class_<LabeledEvent>(m, "LabeledEvent")
      .def(py::init([](const EventTriple& t, int label, DatasetId d, Split s, Origin o) {
             return LabeledEvent{t, label, d, s, o};
           }),
           py::arg("triple"), py::arg("label"), py::arg("dataset") = DatasetId::OTHER,
           py::arg("split") = Split::train, py::arg("origin") = Origin::original)
      .def_readwrite("triple", &LabeledEvent::triple)
      .def_readwrite("label", &LabeledEvent::label)
      .def_readwrite("dataset", &LabeledEvent::dataset)
      .def_readwrite("split", &LabeledEvent::split)
      .def_readwrite("origin", &LabeledEvent::origin);

  py::class_<DatasetBundle>(m, "DatasetBundle")
      .def(py::init<>())
      .def(py::init([](std::vector<LabeledEvent> events) {
             DatasetBundle b;
             b.events = std::move(events);
             return b;
           }),
           py::arg("events"))
      .def_readwrite("events", &DatasetBundle::events)
      .def("counts", [](const DatasetBundle& b) {
        auto c = b.counts();
        return py::make_tuple(c.implausible, c.plausible);
      });

  py::class_<ColumnMapping>(m, "ColumnMapping")
      .def(py::init<>())
      .def_readwrite("subject", &ColumnMapping::subject)
      .def_readwrite("verb", &ColumnMapping::verb)
      .def_readwrite("object", &ColumnMapping::object)
      .def_readwrite("label", &ColumnMapping::label);

  m.def("realize_sentence", &realize_sentence, py::arg("triple"));
  m.def("mark_span", &mark_span, py::arg("triple"), py::arg("role"));
  m.def("span_role_from_string", &span_role_from_string, py::arg("role"),
        "Parse 'subject'/'object'; the verb is not a markable span");
  m.def(
      "load_events",
      [](const std::string& path, DatasetId dataset, Split split, const ColumnMapping& cols) {
        return load_events(path, dataset, split, cols);
      },
      py::arg("path"), py::arg("dataset"), py::arg("split"),
      py::arg("columns") = ColumnMapping{});
  m.def(
      "merge_splits",
      [](const std::vector<DatasetBundle>& bundles, Split target) {
        return merge_splits(bundles, target);
      },
      py::arg("bundles"), py::arg("target_split"));
  m.def("read_events", &read_events, py::arg("path"));
  m.def("write_events", &write_events, py::arg("path"), py::arg("bundle"));

  // augmentation -----------------------------------------------------------
  py::class_<AugmentationPlan>(m, "AugmentationPlan")
      .def(py::init<>())
      .def_readwrite("seed", &AugmentationPlan::seed)
      .def_readwrite("pool_id", &AugmentationPlan::pool_id)
      .def_readwrite("filter_pool_by_id", &AugmentationPlan::filter_pool_by_id);
  m.def(
      "augment_balance",
      [](const DatasetBundle& base, const DatasetBundle& pool, const AugmentationPlan& plan) {
        return augment_balance(base, pool, plan);
      },
      py::arg("base"), py::arg("pool"), py::arg("plan"));

  // knowledge --------------------------------------------------------------
  py::class_<EntityTypePrediction>(m, "EntityTypePrediction")
      .def(py::init([](const std::string& kb_id, const std::string& label,
                       std::optional<std::string> description, int rank) {
             return EntityTypePrediction{kb_id, label, std::move(description), rank};
           }),
           py::arg("kb_id"), py::arg("label"), py::arg("description") = py::none(),
           py::arg("rank") = 0)
      .def_readwrite("kb_id", &EntityTypePrediction::kb_id)
      .def_readwrite("label", &EntityTypePrediction::label)
      .def_readwrite("description", &EntityTypePrediction::description)
      .def_readwrite("rank", &EntityTypePrediction::rank);

  py::class_<EventTypePrediction>(m, "EventTypePrediction")
      .def(py::init([](const std::string& trigger, const std::string& node_id,
                       const std::string& name, std::optional<std::string> description) {
             return EventTypePrediction{trigger, node_id, name, std::move(description)};
           }),
           py::arg("trigger"), py::arg("node_id"), py::arg("name"),
           py::arg("description") = py::none())
      .def_readwrite("trigger", &EventTypePrediction::trigger)
      .def_readwrite("node_id", &EventTypePrediction::node_id)
      .def_readwrite("name", &EventTypePrediction::name)
      .def_readwrite("description", &EventTypePrediction::description);

  py::class_<EnrichedEvent>(m, "EnrichedEvent")
      .def(py::init([](const LabeledEvent& event, std::vector<EntityTypePrediction> subject_types,
                       std::vector<EntityTypePrediction> object_types,
                       std::optional<EventTypePrediction> verb_type) {
             EnrichedEvent e;
             e.event = event;
             e.sentence = realize_sentence(event.triple);
             e.subject_types = std::move(subject_types);
             e.object_types = std::move(object_types);
             e.verb_type = std::move(verb_type);
             return e;
           }),
           py::arg("event"), py::arg("subject_types") = std::vector<EntityTypePrediction>{},
           py::arg("object_types") = std::vector<EntityTypePrediction>{},
           py::arg("verb_type") = py::none())
      .def_readwrite("event", &EnrichedEvent::event)
      .def_readwrite("sentence", &EnrichedEvent::sentence)
      .def_readwrite("subject_types", &EnrichedEvent::subject_types)
      .def_readwrite("object_types", &EnrichedEvent::object_types)
      .def_readwrite("verb_type", &EnrichedEvent::verb_type);

  m.def("select_verb_event", &select_verb_event, py::arg("predictions"), py::arg("verb"));
  m.def(
      "enrich_events",
      [](const DatasetBundle& bundle, const std::string& entity_fixture,
         const std::string& event_fixture, const std::string& cache_path) {
        FixtureEntityTypingProvider entity(entity_fixture);
        FixtureEventDetectionProvider event(event_fixture);
        std::unique_ptr<DefinitionCache> cache;
        StaticKbClient offline{{}};
        ProviderSet providers;
        providers.entity_typing = &entity;
        providers.event_detection = &event;
        if (!cache_path.empty()) {
          cache = std::make_unique<DefinitionCache>(cache_path);
          providers.cache = cache.get();
          providers.kb = &offline;
        }
        return enrich_bundle(bundle, providers);
      },
      py::arg("bundle"), py::arg("entity_fixture"), py::arg("event_fixture"),
      py::arg("cache_path") = "",
      "Enrich a bundle with fixture providers (offline definition cache only)");

  // templating ---------------------------------------------------------------
  py::enum_<PromptMode>(m, "PromptMode")
      .value("evt_ent", PromptMode::evt_ent)
      .value("evt", PromptMode::evt)
      .value("ent", PromptMode::ent)
      .value("baseline", PromptMode::baseline);

  py::class_<PromptFlags>(m, "PromptFlags")
      .def(py::init<>())
      .def_readwrite("verb_unknown", &PromptFlags::verb_unknown)
      .def_readwrite("subject_unknown", &PromptFlags::subject_unknown)
      .def_readwrite("object_unknown", &PromptFlags::object_unknown)
      .def_readwrite("has_trivial_entity_type", &PromptFlags::has_trivial_entity_type)
      .def("__eq__", [](const PromptFlags& a, const PromptFlags& b) { return a == b; });

  py::class_<PromptRecord>(m, "PromptRecord")
      .def(py::init<>())
      .def(py::init([](const std::string& prompt, int label, PromptMode mode) {
             PromptRecord r;
             r.prompt = prompt;
             r.label = label;
             r.mode = mode;
             return r;
           }),
           py::arg("prompt"), py::arg("label"), py::arg("mode") = PromptMode::baseline)
      .def_readwrite("prompt", &PromptRecord::prompt)
      .def_readwrite("label", &PromptRecord::label)
      .def_readwrite("dataset", &PromptRecord::dataset)
      .def_readwrite("split", &PromptRecord::split)
      .def_readwrite("mode", &PromptRecord::mode)
      .def_readwrite("flags", &PromptRecord::flags);

  m.def("render_prompt", &render_prompt, py::arg("enriched"), py::arg("mode"));
  m.def("inspect_prompt", &inspect_prompt, py::arg("prompt"));
  m.def("read_prompts", &read_prompts, py::arg("path"));
  m.def("write_prompts", &write_prompts, py::arg("path"), py::arg("records"));

  // classifier ---------------------------------------------------------------
  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("weight_decay", &TrainConfig::weight_decay)
      .def_readwrite("warmup_steps", &TrainConfig::warmup_steps)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("max_sequence_length", &TrainConfig::max_sequence_length)
      .def_readwrite("encoder_id", &TrainConfig::encoder_id);
  m.def("default_config_for_mode", &default_config_for_mode, py::arg("mode"));
  m.def("compact_desk_config", &compact_desk_config);

  py::class_<Prediction>(m, "Prediction")
      .def_readonly("label", &Prediction::label)
      .def_readonly("score", &Prediction::score)
      .def_readonly("truncated", &Prediction::truncated)
      .def("__repr__", [](const Prediction& p) {
        return "Prediction(label=" + std::to_string(p.label) +
               ", score=" + std::to_string(p.score) + ")";
      });

  py::class_<EpochLog>(m, "EpochLog")
      .def_readonly("epoch", &EpochLog::epoch)
      .def_readonly("train_loss", &EpochLog::train_loss)
      .def_readonly("train_accuracy", &EpochLog::train_accuracy);

  py::class_<TrainingLog>(m, "TrainingLog")
      .def_readonly("epochs", &TrainingLog::epochs)
      .def_readonly("truncated_train", &TrainingLog::truncated_train)
      .def_readonly("truncated_dev", &TrainingLog::truncated_dev);

  py::class_<Model>(m, "Model")
      .def("initialized", &Model::initialized)
      .def_property_readonly("encoder_id", &Model::encoder_id)
      .def("predict", &Model::predict, py::arg("prompts"))
      .def("save", &Model::save, py::arg("path"))
      .def_static("load", &Model::load, py::arg("path"));

  m.def(
      "fine_tune",
      [](const std::vector<PromptRecord>& train, const std::vector<PromptRecord>& dev,
         const TrainConfig& config) {
        auto result = fine_tune(train, dev, config);
        return py::make_tuple(std::move(result.model), std::move(result.log));
      },
      py::arg("train"), py::arg("dev"), py::arg("config"));
  m.def("zero_shot_init", &zero_shot_init, py::arg("config"));

  // evaluation -----------------------------------------------------------
  py::class_<ConfusionCounts>(m, "ConfusionCounts")
      .def_readonly("tp", &ConfusionCounts::tp)
      .def_readonly("fp", &ConfusionCounts::fp)
      .def_readonly("fn", &ConfusionCounts::fn)
      .def_readonly("tn", &ConfusionCounts::tn);

  py::class_<MetricsReport>(m, "MetricsReport")
      .def_readonly("auc", &MetricsReport::auc)
      .def_readonly("precision", &MetricsReport::precision)
      .def_readonly("recall", &MetricsReport::recall)
      .def_readonly("f1", &MetricsReport::f1)
      .def_readonly("accuracy", &MetricsReport::accuracy)
      .def_readonly("confusion", &MetricsReport::confusion)
      .def_readonly("n", &MetricsReport::n)
      .def_readonly("auc_degenerate", &MetricsReport::auc_degenerate);

  m.def(
      "compute_metrics",
      [](const std::vector<Prediction>& preds, const std::vector<int>& golds) {
        return compute_metrics(preds, golds);
      },
      py::arg("predictions"), py::arg("golds"));
  m.def(
      "compute_metrics_from_scores",
      [](const std::vector<double>& scores, const std::vector<int>& golds) {
        std::vector<Prediction> preds;
        preds.reserve(scores.size());
        for (double s : scores) preds.push_back({s >= 0.5 ? 1 : 0, s, false});
        return compute_metrics(preds, golds);
      },
      py::arg("scores"), py::arg("golds"));

  py::class_<ErrorAnalysisReport>(m, "ErrorAnalysisReport")
      .def_readonly("wrong_total", &ErrorAnalysisReport::wrong_total)
      .def_readonly("wrong_with_unknown_event_type",
                    &ErrorAnalysisReport::wrong_with_unknown_event_type)
      .def_readonly("wrong_with_trivial_entity_type",
                    &ErrorAnalysisReport::wrong_with_trivial_entity_type);

  m.def(
      "error_analysis",
      [](const std::vector<std::tuple<PromptRecord, Prediction, int>>& records) {
        std::vector<ScoredRecord> scored;
        scored.reserve(records.size());
        for (const auto& [r, p, g] : records) scored.push_back({r, p, g});
        return error_analysis(scored);
      },
      py::arg("records"));

  // analysis -----------------------------------------------------------
  py::class_<FrequencyTable>(m, "FrequencyTable")
      .def_readonly("label", &FrequencyTable::label)
      .def_readonly("entries", &FrequencyTable::entries);
  m.def(
      "top_words",
      [](const DatasetBundle& events, int label, std::size_t k,
         const std::vector<std::string>& stop_list) {
        return top_words(events, label, k,
                         std::set<std::string>(stop_list.begin(), stop_list.end()));
      },
      py::arg("events"), py::arg("label"), py::arg("k"),
      py::arg("stop_list") = std::vector<std::string>{});
  m.def("cosine_similarity", &cosine_similarity, py::arg("a"), py::arg("b"));
  m.def(
      "label_similarity",
      [](const FrequencyTable& plausible, const FrequencyTable& implausible,
         const std::string& vectors_path) {
        FixtureWordVectors vectors(vectors_path);
        SimilarityMatrix matrix = label_similarity(plausible, implausible, vectors);
        return py::make_tuple(matrix.rows, matrix.cols, matrix.values,
                              matrix.mean_cross_similarity());
      },
      py::arg("top_plausible"), py::arg("top_implausible"), py::arg("vectors_path"));

  // pipeline -----------------------------------------------------------
  m.def(
      "run_stage",
      [](const std::string& stage, const std::string& config_path) {
        auto config = PipelineConfig::from_file(config_path);
        auto result = run_stage(stage_from_string(stage), config);
        return result.artifacts;
      },
      py::arg("stage"), py::arg("config_path"),
      "Run one pipeline stage from a config file; returns written artifacts");
}
