#pragma once

#include <stdexcept>
#include <string>

namespace nh {

// Error categories surfaced by the library.  Each maps to one failure mode a
// caller can act on; the CLI translates them to exit codes and messages.
enum class Errc {
    BadSpec,             // malformed or inconsistent system description
    NotNested,           // open-set / nesting check failed
    NotConnected,        // essential-fixed-point graph is disconnected
    TooFewEssential,     // fewer than two essential fixed points
    BadAddress,          // address word contains an out-of-range digit
    EnvelopeTooLarge,    // requested envelope exceeds the enumeration cap
    NotOnFractal,        // point is not on the fractal at the working tolerance
    NoGLP,               // no consistent lattice labelling exists
    OutsideEnvelope,     // point lies outside the labelled envelope
    UnlabelledCell,      // cell not covered by the supplied labelling
    VertexBase,          // fiber requested at a lattice vertex (ranks are ambiguous)
    EmptyBoundary,       // boundary set is empty at this level
    BadTime,             // nonpositive or nonfinite time argument
    MissingConstants,    // operation needs fitted constants that were not supplied
    NoConvergence,       // series did not reach the tolerance within the term cap
    MCUnavailable,       // simulation parameters exceed what this build supports
    InsufficientSamples, // ensemble too small for the requested statistic
    GridEmpty,           // scan grid contains no admissible evaluation points
};

inline const char* errc_name(Errc e) {
    switch (e) {
        case Errc::BadSpec: return "BadSpec";
        case Errc::NotNested: return "NotNested";
        case Errc::NotConnected: return "NotConnected";
        case Errc::TooFewEssential: return "TooFewEssential";
        case Errc::BadAddress: return "BadAddress";
        case Errc::EnvelopeTooLarge: return "EnvelopeTooLarge";
        case Errc::NotOnFractal: return "NotOnFractal";
        case Errc::NoGLP: return "NoGLP";
        case Errc::OutsideEnvelope: return "OutsideEnvelope";
        case Errc::UnlabelledCell: return "UnlabelledCell";
        case Errc::VertexBase: return "VertexBase";
        case Errc::EmptyBoundary: return "EmptyBoundary";
        case Errc::BadTime: return "BadTime";
        case Errc::MissingConstants: return "MissingConstants";
        case Errc::NoConvergence: return "NoConvergence";
        case Errc::MCUnavailable: return "MCUnavailable";
        case Errc::InsufficientSamples: return "InsufficientSamples";
        case Errc::GridEmpty: return "GridEmpty";
    }
    return "UnknownError";
}

// All library failures are reported as Error; `code()` gives the category.
class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string& what_arg)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what_arg), code_(code) {}

    Errc code() const { return code_; }

  private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

}  // namespace nh
