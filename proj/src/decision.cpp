#include "floff/decision.hpp"

namespace floff {

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::LocalExecute: return "LocalExecute";
    case Verdict::OffloadEdge: return "OffloadEdge";
    case Verdict::OffloadCloud: return "OffloadCloud";
  }
  return "?";
}

const char* stage1_name(Stage1Class c) {
  return c == Stage1Class::Intensive ? "Intensive" : "NotIntensive";
}

const char* stage2_name(Stage2Class c) {
  return c == Stage2Class::Offload ? "Offload" : "Local";
}

ArchSpec default_stage1_spec() {
  return ArchSpec::mlp({uint16_t{kStage1Features}, 64, 2});
}

ArchSpec default_stage2_spec() {
  return ArchSpec::lstm(uint16_t{kSnapshotFeatures}, 32, uint16_t{kWindowLen}, 2);
}

Stage1Class predict_intensive(const ModelWeights& model, const TaskDescriptor& task) {
  if (model.spec.arch != Arch::MLP)
    throw Error(Err::invalid_argument, "stage-1 prediction needs an MLP model");
  auto feats = featurize_task(task);
  auto probs = forward_probs(model, feats);
  return static_cast<Stage1Class>(argmax_class(probs));
}

Stage2Class predict_offload(const ModelWeights& model,
                            std::span<const NetworkSnapshot> window) {
  if (model.spec.arch != Arch::LSTM)
    throw Error(Err::invalid_argument, "stage-2 prediction needs an LSTM model");
  if (window.size() != model.spec.seq_len())
    throw Error(Err::invalid_argument,
                "window length " + std::to_string(window.size()) +
                    " does not match model sequence length " +
                    std::to_string(model.spec.seq_len()));
  auto feats = featurize_window(window);
  auto probs = forward_probs(model, feats);
  return static_cast<Stage2Class>(argmax_class(probs));
}

Decision decide(const TaskDescriptor& task, std::span<const NetworkSnapshot> window,
                const ModelWeights& stage1_model, const ModelWeights& stage2_model,
                DecideStats* stats) {
  Decision d;
  d.stage1 = predict_intensive(stage1_model, task);
  if (d.stage1 == Stage1Class::NotIntensive) {
    d.stage2_applied = false;
    d.verdict = task.pref == UserPref::RemoteAccess ? Verdict::OffloadCloud
                                                    : Verdict::LocalExecute;
    return d;
  }
  if (stats) ++stats->stage2_evaluations;
  d.stage2_applied = true;
  auto s2 = predict_offload(stage2_model, window);
  d.verdict = s2 == Stage2Class::Offload ? Verdict::OffloadEdge : Verdict::LocalExecute;
  return d;
}

ModelWeights forced_class_model(const ArchSpec& spec, uint16_t cls) {
  if (cls >= spec.num_classes())
    throw Error(Err::invalid_argument, "forced class out of range");
  ModelWeights w;
  w.spec = spec;
  w.layers = spec.skeleton();
  const char* bias = spec.arch == Arch::MLP ? "out.b" : "head.b";
  w.tensor(bias).values[cls] = 1.0;
  return w;
}

}  // namespace floff
