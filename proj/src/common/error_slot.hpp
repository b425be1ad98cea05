#pragma once

#include <exception>

namespace qmoe::detail {

/// Holds the first exception raised inside an OpenMP loop body so it can be
/// rethrown on the calling thread once the region has joined.
class ErrorSlot {
 public:
  template <typename F>
  void run(F&& body) noexcept {
    try {
      body();
    } catch (...) {
#pragma omp critical(qmoe_error_slot)
      if (!error_) error_ = std::current_exception();
    }
  }

  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::exception_ptr error_;
};

}  // namespace qmoe::detail
