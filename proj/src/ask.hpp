#pragma once

#include <string>

#include "ciaf/error.hpp"
#include "ciaf/gateway.hpp"
#include "ciaf/pipeline.hpp"

namespace ciaf::detail {

/// Sends `request`, hands the reply text to `parse`, and on a parse failure
/// re-asks once with the failed reply and the error appended to the user turn.
/// A second failure is rethrown as `Failure`. Gateway errors pass through.
template <typename Failure, typename Parse>
auto ask_with_reask(Gateway& gateway, ChatRequest request, const std::string& agent, CallTrace* trace,
                    Parse&& parse) {
    auto response = gateway.chat(request);
    if (trace) trace->push_back({agent, response.cache_key});
    try {
        return parse(response.text);
    } catch (const Error& first) {
        request.user_prompt += "\n\nYour previous reply was:\n" + response.text +
                               "\n\nIt could not be used (" + first.what() +
                               "). Reply again and follow the required output format exactly.";
        auto retry = gateway.chat(request);
        if (trace) trace->push_back({agent, retry.cache_key});
        try {
            return parse(retry.text);
        } catch (const Error& second) {
            throw Failure(agent + " reply unusable after re-ask: " + second.what());
        }
    }
}

std::string casefold(std::string_view s);
std::string trim_copy(std::string_view s);

}  // namespace ciaf::detail
