#pragma once

#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "n2i/llm.hpp"

namespace n2i::testkit {

// Chat backend driven by a lambda; keeps every request it saw.
class FunctionBackend final : public ChatBackend {
 public:
  using Fn = std::function<std::string(const CompletionRequest&)>;
  explicit FunctionBackend(Fn fn) : fn_(std::move(fn)) {}

  std::string send(const CompletionRequest& request) const override {
    {
      std::lock_guard lock(mutex_);
      requests_.push_back(request);
    }
    return fn_(request);
  }
  std::string describe() const override { return "function"; }

  std::vector<CompletionRequest> requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
  }

 private:
  Fn fn_;
  mutable std::mutex mutex_;
  mutable std::vector<CompletionRequest> requests_;
};

}  // namespace n2i::testkit
