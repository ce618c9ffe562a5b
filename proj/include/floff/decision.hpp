#pragma once

#include <span>

#include "floff/dataset.hpp"
#include "floff/model.hpp"
#include "floff/nn.hpp"

namespace floff {

enum class Stage1Class : uint8_t { NotIntensive = 0, Intensive = 1 };
enum class Stage2Class : uint8_t { Local = 0, Offload = 1 };
enum class Verdict : uint8_t { LocalExecute = 0, OffloadEdge = 1, OffloadCloud = 2 };

const char* verdict_name(Verdict v);
const char* stage1_name(Stage1Class c);
const char* stage2_name(Stage2Class c);

struct Decision {
  Verdict verdict = Verdict::LocalExecute;
  Stage1Class stage1 = Stage1Class::NotIntensive;
  bool stage2_applied = false;
};

// counts how often the network window is actually consulted
struct DecideStats {
  uint64_t stage2_evaluations = 0;
};

ArchSpec default_stage1_spec();
ArchSpec default_stage2_spec();

Stage1Class predict_intensive(const ModelWeights& model, const TaskDescriptor& task);
Stage2Class predict_offload(const ModelWeights& model,
                            std::span<const NetworkSnapshot> window);

// Routing: NotIntensive + RemoteAccess -> OffloadCloud; NotIntensive +
// LocalAccess -> LocalExecute; Intensive -> stage 2 (Offload -> OffloadEdge,
// Local -> LocalExecute). The window is only read on the Intensive path.
Decision decide(const TaskDescriptor& task, std::span<const NetworkSnapshot> window,
                const ModelWeights& stage1_model, const ModelWeights& stage2_model,
                DecideStats* stats = nullptr);

// Constant-output model: every forward pass yields class `cls` regardless of
// input (all weights zero, output bias raised for the chosen class).
ModelWeights forced_class_model(const ArchSpec& spec, uint16_t cls);

}  // namespace floff
