#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace svrl {

// A trajectory interleaves solve attempts with self-verifications:
//
//   (s_1, v_1, s_2, v_2, ..., s_k, v_k, <end>)
//
// A solve action emits a candidate answer token, a verify action judges the
// preceding solve, and the end marker closes the sequence once a verification
// concludes "correct".

enum class ActionType { Solve, Verify, End };

enum class Verdict { Correct, Incorrect };

// Answer tokens index a finite alphabet. Their text form is bijective
// base-26: 0 -> "A", 25 -> "Z", 26 -> "AA", ...
using Token = std::int32_t;

std::string token_text(Token token);
Token token_from_text(std::string_view text);

// Conclusion sentences a verification may end with. "cannot be verified"
// parses as Incorrect: it triggers a retry, which is the conservative
// reading of an inconclusive check.
extern const std::string kConcludeCorrect;
extern const std::string kConcludeIncorrect;
extern const std::string kConcludeCannotVerify;

// Separator lines of the trajectory text format.
extern const std::string kRecheckLine;   // follows every solve block
extern const std::string kRetryLine;     // between rounds

struct Action {
    ActionType kind;
    std::optional<Token> answer_token;        // present iff kind == Solve
    std::optional<std::string> verdict_text;  // present iff kind == Verify
    std::optional<Verdict> parsed_verdict;    // derived from verdict_text

    static Action solve(Token answer);
    static Action verify_text(std::string text);  // parses the conclusion
    static Action verify(Verdict verdict);        // renders the template text
    static Action end();

    bool operator==(const Action&) const = default;
};

struct Trajectory {
    std::string problem_id;
    std::vector<Action> actions;

    bool terminated() const {
        return !actions.empty() && actions.back().kind == ActionType::End;
    }
    // One synthetic action is one token, so |y| == |y|_a.
    int action_count() const { return static_cast<int>(actions.size()); }
    int solve_count() const;
    // Index of the last solve action, or -1 if there is none.
    int last_solve_index() const;

    bool operator==(const Trajectory&) const = default;
};

// Type of the action that must follow `prev` under the transition rule:
// solve -> verify; verify judged incorrect -> solve; verify judged correct
// -> end. Throws on a terminated trajectory or an unparsed verdict.
ActionType next_action_type(const Action& prev);

// Maps free-form verification text to a binary verdict by its conclusion
// sentence (matched at the end of the text, ignoring trailing whitespace and
// a trailing period). Throws Error(Data) when no conclusion is recognized.
Verdict parse_verdict(std::string_view text);

// Rendered conclusion for a verdict; parse_verdict inverts it.
const std::string& verdict_conclusion(Verdict verdict);

enum class RejectReason { Alternation, TooLong, ConfirmedContinue, MissingTermination };

std::string_view reject_reason_name(RejectReason reason);

struct ValidationResult {
    std::optional<RejectReason> reason;  // empty means accepted

    bool accepted() const { return !reason.has_value(); }
    static ValidationResult ok() { return {}; }
    static ValidationResult rejected(RejectReason r) { return {r}; }
};

// Rejection-sampling rules, checked in order:
//   alternation          action types do not match (solve verify)+ end?, or
//                        an end marker follows a verification judged incorrect
//   too_long             more than max_actions actions (the end marker counts)
//   confirmed_continue   a golden-correct solve was confirmed by its
//                        verification, yet the trajectory continued
//   missing_termination  the trajectory does not finish with the end marker
//
// golden_answer supplies the ground truth needed by the confirmed_continue
// rule.
ValidationResult validate_trajectory(const Trajectory& traj, int max_actions,
                                     Token golden_answer);

// Text format, one round per solve attempt:
//
//   [[answer: <token>]]
//   Wait, let me recheck my solution
//   <verification text ending in a conclusion sentence>
//   Let me try again.          <- only between rounds
//
// A trajectory whose final verification concludes "correct" carries the end
// marker; one concluding "incorrect" is truncated. serialize accepts any
// alternating trajectory; deserialize inverts serialize and reports the byte
// offset of the first grammar violation otherwise.
std::string serialize_trajectory(const Trajectory& traj);
Trajectory deserialize_trajectory(std::string_view text, std::string problem_id = "");

}  // namespace svrl
