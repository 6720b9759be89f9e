#pragma once

#include <stdexcept>
#include <string>

namespace odm {

// Root of all toolkit errors. Subclasses carry the failure identity so
// callers can catch a specific condition without parsing messages.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define ODM_ERROR_TYPE(Name)                                       \
  struct Name : Error {                                            \
    explicit Name(const std::string& msg) : Error(#Name ": " + msg) {} \
  }

// package / binary parsing
ODM_ERROR_TYPE(NotAnApk);
ODM_ERROR_TYPE(CorruptArchive);
ODM_ERROR_TYPE(NotAnElf);
ODM_ERROR_TYPE(MissingRodata);
ODM_ERROR_TYPE(UnreadableLabelFile);

// model formats / analysis / conversion
ODM_ERROR_TYPE(UnsupportedFormat);
ODM_ERROR_TYPE(UnsupportedOperator);
ODM_ERROR_TYPE(ShapeMismatch);
ODM_ERROR_TYPE(SignatureMismatch);
ODM_ERROR_TYPE(ExportUnsupported);

// trigger generator / attack
ODM_ERROR_TYPE(EmptySecret);
ODM_ERROR_TYPE(DivergedTraining);
ODM_ERROR_TYPE(PatchTooLarge);
ODM_ERROR_TYPE(InsufficientEligibleSamples);
ODM_ERROR_TYPE(ProvenanceMismatch);

// evaluation
ODM_ERROR_TYPE(EmptyTestset);
ODM_ERROR_TYPE(EmptyPool);
ODM_ERROR_TYPE(WindowTooLarge);
ODM_ERROR_TYPE(ImageTooSmallForScales);
ODM_ERROR_TYPE(InconsistentSchema);

// cli / orchestration
ODM_ERROR_TYPE(ConfigInvalid);
ODM_ERROR_TYPE(MissingUpstreamArtifact);

#undef ODM_ERROR_TYPE

}  // namespace odm
