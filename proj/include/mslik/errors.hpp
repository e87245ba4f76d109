#pragma once

#include <stdexcept>
#include <string>

namespace mslik {

// Base class for everything thrown by this library.
class error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// A caller-supplied value is outside its documented domain.
class invalid_argument : public error {
  public:
    using error::error;
};

// A split point does not fall in the interior of a current leaf.
class invalid_split : public error {
  public:
    using error::error;
};

// A signal cannot be sampled under the requested observation model.
class invalid_signal : public error {
  public:
    using error::error;
};

// Parameters violate a model-specific constraint (e.g. binomial p outside [0,1]).
class invalid_params : public error {
  public:
    using error::error;
};

// An estimator/model/grid combination that cannot be run.
class invalid_config : public error {
  public:
    using error::error;
};

// Data handed to an analysis routine is unusable (e.g. nonpositive risks).
class invalid_data : public error {
  public:
    using error::error;
};

// An exhaustive routine was asked to exceed its hard size cap.
class resource_limit : public error {
  public:
    using error::error;
};

}  // namespace mslik
