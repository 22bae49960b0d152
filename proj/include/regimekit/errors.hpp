#ifndef REGIMEKIT_ERRORS_HPP
#define REGIMEKIT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace regimekit {

// Base class for all library errors. Subclasses map onto the CLI exit
// codes: ConfigError -> 2, DataError -> 3, StageError -> 4.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class StageError : public Error {
public:
    StageError(const std::string& stage, const std::string& cause)
        : Error("stage '" + stage + "' failed: " + cause), stage_(stage) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

// ingest
class FileNotFoundError : public DataError { public: using DataError::DataError; };
class ParseError : public DataError {
public:
    ParseError(const std::string& msg, std::size_t row)
        : DataError(msg + " (row " + std::to_string(row) + ")"), row_(row) {}
    std::size_t row() const { return row_; }
private:
    std::size_t row_;
};
class DuplicateDateError : public DataError { public: using DataError::DataError; };
class FewerThanTwoRowsError : public DataError { public: using DataError::DataError; };
class NonPositivePriceError : public DataError { public: using DataError::DataError; };
class TooFewObservationsError : public DataError { public: using DataError::DataError; };

// bds
class SeriesTooShortError : public DataError { public: using DataError::DataError; };
class DegenerateVarianceError : public DataError { public: using DataError::DataError; };

// emd
class TooShortError : public DataError { public: using DataError::DataError; };
class NonFiniteInputError : public DataError { public: using DataError::DataError; };
class NormalizationFailureError : public Error { public: using Error::Error; };

// regimes / hhsa
class EmptyDecompositionError : public DataError { public: using DataError::DataError; };
class AllZeroEnergyError : public DataError { public: using DataError::DataError; };
class InvalidGridError : public ConfigError { public: using ConfigError::ConfigError; };
class EmptyWindowError : public DataError { public: using DataError::DataError; };
class ZeroEnergyError : public DataError { public: using DataError::DataError; };

// vlmc
class SequenceTooShortError : public DataError { public: using DataError::DataError; };
class SupportViolationError : public Error { public: using Error::Error; };

// pipeline
class MissingInputError : public DataError { public: using DataError::DataError; };
class MissingStageOutputError : public DataError { public: using DataError::DataError; };

}  // namespace regimekit

#endif
