#pragma once

#include <string>
#include <vector>

namespace mandala {

struct Pos {
    uint32_t line = 0;    // 1-based
    uint32_t column = 0;  // 1-based
    bool operator==(const Pos&) const = default;
};

// Stable diagnostic codes. Tests key on these; do not rename.
namespace diag {
inline constexpr const char* NameUnknown = "E-NAME-UNKNOWN";
inline constexpr const char* NameDup = "E-NAME-DUP";
inline constexpr const char* RecForward = "E-REC-FORWARD";
inline constexpr const char* ImportMissing = "E-IMPORT-MISSING";
inline constexpr const char* TypeMismatch = "E-TYPE-MISMATCH";
inline constexpr const char* MatchNonExh = "E-MATCH-NONEXH";
inline constexpr const char* GenericAmbig = "E-GENERIC-AMBIG";
inline constexpr const char* CtorClosed = "E-CTOR-CLOSED";
inline constexpr const char* LinCopy = "E-LIN-COPY";
inline constexpr const char* LinDrop = "E-LIN-DROP";
inline constexpr const char* Inspect = "E-INSPECT";
inline constexpr const char* CapAttach = "E-CAP-ATTACH";
inline constexpr const char* CapStruct = "E-CAP-STRUCT";
inline constexpr const char* VisProtected = "E-VIS-PROTECTED";
inline constexpr const char* VisPrivate = "E-VIS-PRIVATE";
inline constexpr const char* EffEscalate = "E-EFF-ESCALATE";
inline constexpr const char* EffModifyImpure = "E-EFF-MODIFY-IMPURE";
inline constexpr const char* ValEffect = "E-VAL-EFFECT";
inline constexpr const char* ValCaps = "E-VAL-CAPS";
inline constexpr const char* RiskUndeclared = "E-RISK-UNDECLARED";
inline constexpr const char* Persist = "E-PERSIST";
inline constexpr const char* Lex = "E-LEX";
inline constexpr const char* Parse = "E-PARSE";
}  // namespace diag

struct Diagnostic {
    std::string code;
    Pos pos;
    std::string message;
    std::vector<Pos> related;

    // `CODE file:line:col message`
    std::string line(const std::string& file) const;
};

using Diagnostics = std::vector<Diagnostic>;

}  // namespace mandala
