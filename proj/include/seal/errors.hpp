#pragma once

#include <stdexcept>
#include <string>

namespace seal {

// Base of every error the toolkit raises. `kind()` is the stable name used in
// CLI diagnostics and sidecar error payloads.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string & what)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

    const std::string & kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define SEAL_DEFINE_ERROR(Name)                                              \
    class Name : public Error {                                              \
    public:                                                                  \
        explicit Name(const std::string & what) : Error(#Name, what) {}      \
    }

SEAL_DEFINE_ERROR(AlignmentError);
SEAL_DEFINE_ERROR(ContextOverflow);
SEAL_DEFINE_ERROR(InvalidConfig);
SEAL_DEFINE_ERROR(MissingCheckpoint);
SEAL_DEFINE_ERROR(DivergedTraining);
SEAL_DEFINE_ERROR(EmptyCategory);
SEAL_DEFINE_ERROR(MissingMean);
SEAL_DEFINE_ERROR(BadMagic);
SEAL_DEFINE_ERROR(ChecksumMismatch);
SEAL_DEFINE_ERROR(DimensionMismatch);
SEAL_DEFINE_ERROR(LayerOutOfRange);
SEAL_DEFINE_ERROR(ParseError);
SEAL_DEFINE_ERROR(MissingPair);
SEAL_DEFINE_ERROR(TooFewPoints);
SEAL_DEFINE_ERROR(InsufficientData);
SEAL_DEFINE_ERROR(EmptyInput);
SEAL_DEFINE_ERROR(BackendError);
SEAL_DEFINE_ERROR(ProtocolError);

#undef SEAL_DEFINE_ERROR

} // namespace seal
