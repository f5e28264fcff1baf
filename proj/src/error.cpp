#include "copytrace/error.hpp"

namespace copytrace {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
    case Errc::NotAGitRepository: return "NotAGitRepository";
    case Errc::UnsupportedPackVersion: return "UnsupportedPackVersion";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::CorruptIndex: return "CorruptIndex";
    case Errc::ObjectNotFound: return "ObjectNotFound";
    case Errc::CorruptObject: return "CorruptObject";
    case Errc::DeltaBaseMissing: return "DeltaBaseMissing";
    case Errc::DeltaDepthExceeded: return "DeltaDepthExceeded";
    case Errc::MalformedCommitHeader: return "MalformedCommitHeader";
    case Errc::CorruptTree: return "CorruptTree";
    case Errc::CycleDetected: return "CycleDetected";
    case Errc::UnmappedRepository: return "UnmappedRepository";
    case Errc::UnknownRepository: return "UnknownRepository";
    case Errc::ShardIOFailure: return "ShardIOFailure";
    case Errc::SpillSpaceExhausted: return "SpillSpaceExhausted";
    case Errc::UnsortedInput: return "UnsortedInput";
    case Errc::WindowExceedsCorpusSpan: return "WindowExceedsCorpusSpan";
    case Errc::Undefined: return "Undefined";
    case Errc::Singular: return "Singular";
    case Errc::Separation: return "Separation";
    case Errc::ClassMissing: return "ClassMissing";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::ScriptInvalid: return "ScriptInvalid";
    case Errc::DirNotEmpty: return "DirNotEmpty";
    case Errc::MissingStageOutput: return "MissingStageOutput";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace copytrace
