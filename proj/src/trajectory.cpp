#include "trajectory.hpp"

#include <algorithm>

namespace svrl {

const std::string kConcludeCorrect = "Therefore, the answer is correct.";
const std::string kConcludeIncorrect = "Therefore, the answer is incorrect.";
const std::string kConcludeCannotVerify = "Therefore, the answer cannot be verified.";

const std::string kRecheckLine = "Wait, let me recheck my solution";
const std::string kRetryLine = "Let me try again.";

std::string token_text(Token token) {
    if (token < 0) throw Error(ErrorCode::Usage, "negative answer token");
    std::string out;
    std::int64_t n = token;
    do {
        out.push_back(static_cast<char>('A' + n % 26));
        n = n / 26 - 1;
    } while (n >= 0);
    std::reverse(out.begin(), out.end());
    return out;
}

Token token_from_text(std::string_view text) {
    if (text.empty()) throw Error(ErrorCode::Data, "empty answer token");
    std::int64_t n = 0;
    for (char c : text) {
        if (c < 'A' || c > 'Z')
            throw Error(ErrorCode::Data, "bad answer token '" + std::string(text) + "'");
        n = n * 26 + (c - 'A' + 1);
        if (n > (1LL << 31)) throw Error(ErrorCode::Data, "answer token out of range");
    }
    return static_cast<Token>(n - 1);
}

Action Action::solve(Token answer) {
    Action a;
    a.kind = ActionType::Solve;
    a.answer_token = answer;
    return a;
}

Action Action::verify_text(std::string text) {
    Action a;
    a.kind = ActionType::Verify;
    a.parsed_verdict = parse_verdict(text);
    a.verdict_text = std::move(text);
    return a;
}

Action Action::verify(Verdict verdict) {
    Action a;
    a.kind = ActionType::Verify;
    a.verdict_text = verdict_conclusion(verdict);
    a.parsed_verdict = verdict;
    return a;
}

Action Action::end() {
    Action a;
    a.kind = ActionType::End;
    return a;
}

int Trajectory::solve_count() const {
    int n = 0;
    for (const Action& a : actions)
        if (a.kind == ActionType::Solve) ++n;
    return n;
}

int Trajectory::last_solve_index() const {
    for (int i = action_count() - 1; i >= 0; --i)
        if (actions[i].kind == ActionType::Solve) return i;
    return -1;
}

ActionType next_action_type(const Action& prev) {
    switch (prev.kind) {
        case ActionType::Solve:
            return ActionType::Verify;
        case ActionType::Verify:
            if (!prev.parsed_verdict)
                throw Error(ErrorCode::Data, "unparsed verdict");
            return *prev.parsed_verdict == Verdict::Incorrect ? ActionType::Solve
                                                              : ActionType::End;
        case ActionType::End:
            throw Error(ErrorCode::Usage, "trajectory already terminated");
    }
    throw Error(ErrorCode::Internal, "unreachable");
}

namespace {

bool ends_with_conclusion(std::string_view text, std::string_view conclusion) {
    // Trailing whitespace and a final period are insignificant on both sides.
    auto strip = [](std::string_view s) {
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\n' ||
                              s.back() == '\r'))
            s.remove_suffix(1);
        if (!s.empty() && s.back() == '.') s.remove_suffix(1);
        return s;
    };
    std::string_view t = strip(text);
    std::string_view c = strip(conclusion);
    return t.size() >= c.size() && t.substr(t.size() - c.size()) == c;
}

}  // namespace

Verdict parse_verdict(std::string_view text) {
    if (ends_with_conclusion(text, kConcludeIncorrect)) return Verdict::Incorrect;
    if (ends_with_conclusion(text, kConcludeCannotVerify)) return Verdict::Incorrect;
    if (ends_with_conclusion(text, kConcludeCorrect)) return Verdict::Correct;
    throw Error(ErrorCode::Data, "unparseable verification");
}

const std::string& verdict_conclusion(Verdict verdict) {
    return verdict == Verdict::Correct ? kConcludeCorrect : kConcludeIncorrect;
}

std::string_view reject_reason_name(RejectReason reason) {
    switch (reason) {
        case RejectReason::Alternation: return "alternation";
        case RejectReason::TooLong: return "too_long";
        case RejectReason::ConfirmedContinue: return "confirmed_continue";
        case RejectReason::MissingTermination: return "missing_termination";
    }
    return "unknown";
}

ValidationResult validate_trajectory(const Trajectory& traj, int max_actions,
                                     Token golden_answer) {
    const auto& acts = traj.actions;
    const int n = traj.action_count();

    // (a) structural pattern: (solve verify)+ end?, with the end marker only
    // after a verification judged correct.
    if (n == 0) return ValidationResult::rejected(RejectReason::Alternation);
    int pairs = 0;
    int i = 0;
    while (i + 1 < n && acts[i].kind == ActionType::Solve &&
           acts[i + 1].kind == ActionType::Verify) {
        if (!acts[i + 1].parsed_verdict)
            return ValidationResult::rejected(RejectReason::Alternation);
        ++pairs;
        i += 2;
    }
    const bool has_end = (i == n - 1) && acts[i].kind == ActionType::End;
    if (pairs == 0 || (i != n && !has_end))
        return ValidationResult::rejected(RejectReason::Alternation);
    if (has_end && acts[n - 2].parsed_verdict != Verdict::Correct)
        return ValidationResult::rejected(RejectReason::Alternation);

    // (b) length cap; the end marker counts as an action.
    if (n > max_actions) return ValidationResult::rejected(RejectReason::TooLong);

    // (c) no continuation once a golden-correct solve has been confirmed.
    for (int t = 0; t < pairs; ++t) {
        const bool solve_correct = acts[2 * t].answer_token == golden_answer;
        const bool confirmed = acts[2 * t + 1].parsed_verdict == Verdict::Correct;
        const int tail = n - (2 * t + 2);  // actions after this pair
        if (solve_correct && confirmed && tail > (has_end ? 1 : 0))
            return ValidationResult::rejected(RejectReason::ConfirmedContinue);
    }

    // (d) must finish with the end marker.
    if (!has_end) return ValidationResult::rejected(RejectReason::MissingTermination);

    return ValidationResult::ok();
}

std::string serialize_trajectory(const Trajectory& traj) {
    const auto& acts = traj.actions;
    std::string out;
    int round = 0;
    for (std::size_t i = 0; i < acts.size(); ++i) {
        const Action& a = acts[i];
        switch (a.kind) {
            case ActionType::Solve:
                if (!a.answer_token)
                    throw Error(ErrorCode::Usage, "solve action without answer token");
                if (round > 0) out += kRetryLine + "\n";
                ++round;
                out += "[[answer: " + token_text(*a.answer_token) + "]]\n";
                out += kRecheckLine + "\n";
                break;
            case ActionType::Verify:
                if (!a.verdict_text)
                    throw Error(ErrorCode::Usage, "verify action without text");
                out += *a.verdict_text + "\n";
                break;
            case ActionType::End:
                if (i + 1 != acts.size())
                    throw Error(ErrorCode::Usage, "end marker before the last action");
                break;
        }
    }
    return out;
}

namespace {

struct LineReader {
    std::string_view text;
    std::size_t pos = 0;

    bool done() const { return pos >= text.size(); }

    // Returns the next line without its newline; offset_out is where it starts.
    std::string_view peek_line(std::size_t& offset_out) const {
        offset_out = pos;
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) return text.substr(pos);
        return text.substr(pos, nl - pos);
    }

    void consume_line() {
        std::size_t nl = text.find('\n', pos);
        pos = (nl == std::string_view::npos) ? text.size() : nl + 1;
    }
};

}  // namespace

Trajectory deserialize_trajectory(std::string_view text, std::string problem_id) {
    Trajectory traj;
    traj.problem_id = std::move(problem_id);
    LineReader reader{text};

    while (true) {
        std::size_t offset = 0;
        std::string_view line = reader.peek_line(offset);
        if (reader.done())
            throw ParseError(offset, "expected a solve block");

        // Solve line: [[answer: <token>]]
        constexpr std::string_view kOpen = "[[answer: ";
        constexpr std::string_view kClose = "]]";
        if (line.substr(0, kOpen.size()) != kOpen || line.size() < kOpen.size() + kClose.size() ||
            line.substr(line.size() - kClose.size()) != kClose)
            throw ParseError(offset, "expected boxed answer marker");
        std::string_view token_str =
            line.substr(kOpen.size(), line.size() - kOpen.size() - kClose.size());
        Token token;
        try {
            token = token_from_text(token_str);
        } catch (const Error&) {
            throw ParseError(offset + kOpen.size(), "bad answer token");
        }
        traj.actions.push_back(Action::solve(token));
        reader.consume_line();

        // Recheck separator.
        line = reader.peek_line(offset);
        if (reader.done() || line != kRecheckLine)
            throw ParseError(offset, "expected recheck line");
        reader.consume_line();

        // Verification text: everything up to the retry separator or EOF.
        std::size_t verify_offset = reader.pos;
        std::string verify_text;
        bool more_rounds = false;
        while (!reader.done()) {
            line = reader.peek_line(offset);
            if (line == kRetryLine) {
                more_rounds = true;
                reader.consume_line();
                break;
            }
            if (!verify_text.empty()) verify_text += "\n";
            verify_text += std::string(line);
            reader.consume_line();
        }
        Verdict verdict;
        try {
            verdict = parse_verdict(verify_text);
        } catch (const Error&) {
            throw ParseError(verify_offset, "verification lacks a conclusion sentence");
        }
        traj.actions.push_back(Action::verify_text(std::move(verify_text)));
        if (!more_rounds) {
            if (verdict == Verdict::Correct) traj.actions.push_back(Action::end());
            return traj;
        }
    }
}

}  // namespace svrl
