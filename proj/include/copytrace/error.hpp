#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace copytrace {

enum class Errc {
    // gitstore
    NotAGitRepository,
    UnsupportedPackVersion,
    UnsupportedFormat,
    CorruptIndex,
    ObjectNotFound,
    CorruptObject,
    DeltaBaseMissing,
    DeltaDepthExceeded,
    MalformedCommitHeader,
    CorruptTree,
    // extract / defork
    CycleDetected,
    UnmappedRepository,
    UnknownRepository,
    // timeline
    ShardIOFailure,
    SpillSpaceExhausted,
    UnsortedInput,
    // metrics
    WindowExceedsCorpusSpan,
    Undefined,
    // stats
    Singular,
    Separation,
    ClassMissing,
    DegenerateInput,
    // synth
    ScriptInvalid,
    DirNotEmpty,
    // cli / pipeline
    MissingStageOutput,
    InsufficientData,
    ConfigInvalid,
    IoError,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code), detail_(message) {}

    Errc code() const noexcept { return code_; }
    /// Message without the code prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    Errc code_;
    std::string detail_;
};

}  // namespace copytrace
