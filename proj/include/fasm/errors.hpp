#pragma once

#include <stdexcept>
#include <string>

namespace fasm {

// Exit-code families used by the CLI:
//   2 config/validation, 3 data, 4 numerical/fit, 5 I/O.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error { using Error::Error; };

struct DataError : Error { using Error::Error; };
struct SchemaError : DataError { using DataError::DataError; };
struct ParseError : DataError { using DataError::DataError; };
struct SplitError : DataError { using DataError::DataError; };

struct NumericError : Error { using Error::Error; };
struct ObjectiveError : NumericError { using NumericError::NumericError; };
struct DegenerateDesignError : NumericError { using NumericError::NumericError; };
struct SeparationError : NumericError { using NumericError::NumericError; };
struct ConditioningError : NumericError { using NumericError::NumericError; };
struct MetricUndefinedError : NumericError { using NumericError::NumericError; };
struct SamplingExhaustedError : NumericError { using NumericError::NumericError; };
struct SelectionError : NumericError { using NumericError::NumericError; };

struct IoError : Error { using Error::Error; };

}  // namespace fasm
