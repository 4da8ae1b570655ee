#pragma once

#include <stdexcept>
#include <string>

namespace bgait {

// Base for all pipeline errors. `module_name` identifies the stage that
// raised the error so the CLI can emit machine-parsable diagnostics.
class PipelineError : public std::runtime_error {
public:
    PipelineError(std::string module_name, std::string cause)
        : std::runtime_error(module_name + ": " + cause),
          module_(std::move(module_name)) {}

    const std::string& module_name() const noexcept { return module_; }

private:
    std::string module_;
};

#define BGAIT_DEFINE_ERROR(Name, Module)                        \
    class Name : public PipelineError {                         \
    public:                                                     \
        explicit Name(const std::string& cause = #Name)         \
            : PipelineError(Module, cause) {}                   \
    }

BGAIT_DEFINE_ERROR(EmptyFrame, "silhouette_core");
BGAIT_DEFINE_ERROR(MissingPath, "silhouette_core");
BGAIT_DEFINE_ERROR(UnreadableImage, "silhouette_core");
BGAIT_DEFINE_ERROR(EmptySequence, "silhouette_core");

BGAIT_DEFINE_ERROR(DimTooLarge, "keypose");
BGAIT_DEFINE_ERROR(InsufficientData, "keypose");

BGAIT_DEFINE_ERROR(GeometryMismatch, "pose_graph");

BGAIT_DEFINE_ERROR(DegreeOutOfRange, "occlusion_synth");
BGAIT_DEFINE_ERROR(LengthMismatch, "occlusion_synth");

BGAIT_DEFINE_ERROR(InvalidState, "cvae");
BGAIT_DEFINE_ERROR(DimensionMismatch, "cvae");
BGAIT_DEFINE_ERROR(EmptyCorpus, "cvae");

BGAIT_DEFINE_ERROR(SequenceTooShort, "temporal_filter");
BGAIT_DEFINE_ERROR(AllFramesOccluded, "temporal_filter");

BGAIT_DEFINE_ERROR(SingleClass, "recognizer");
BGAIT_DEFINE_ERROR(EmptyGallery, "recognizer");

BGAIT_DEFINE_ERROR(EmptyRecords, "evaluation");
BGAIT_DEFINE_ERROR(InsufficientPerClass, "evaluation");

BGAIT_DEFINE_ERROR(CheckpointError, "checkpoint");
BGAIT_DEFINE_ERROR(ConfigError, "config");

#undef BGAIT_DEFINE_ERROR

}  // namespace bgait
