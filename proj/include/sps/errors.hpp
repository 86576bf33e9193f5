#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace sps {

// Every failure the library reports derives from Error. The kind drives the
// CLI exit code (see tools/sps_main.cpp).
class Error : public std::runtime_error {
public:
    enum class Kind {
        InvalidParams,
        InvalidConfig,
        NumericalBlowup,
        RecordUndefined,
        EmptyBatch,
        DelayOutOfRange,
        DegenerateDenominator,
        InvariantViolation,
        Io,
    };

    Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

class InvalidParams : public Error {
public:
    explicit InvalidParams(std::vector<std::string> fields)
        : Error(Kind::InvalidParams, join(fields)), fields_(std::move(fields))
    {
    }

    const std::vector<std::string>& fields() const noexcept { return fields_; }

private:
    static std::string join(const std::vector<std::string>& fields)
    {
        std::string out = "invalid parameters:";
        for (const auto& f : fields) {
            out += ' ';
            out += f;
            out += ';';
        }
        return out;
    }

    std::vector<std::string> fields_;
};

class InvalidConfig : public Error {
public:
    explicit InvalidConfig(const std::string& what) : Error(Kind::InvalidConfig, what) {}
};

class NumericalBlowup : public Error {
public:
    explicit NumericalBlowup(const std::string& what) : Error(Kind::NumericalBlowup, what) {}
};

class RecordUndefined : public Error {
public:
    RecordUndefined()
        : Error(Kind::RecordUndefined,
                "measurement record undefined: eta * gamma must be positive")
    {
    }
};

class EmptyBatch : public Error {
public:
    EmptyBatch() : Error(Kind::EmptyBatch, "calibration batch is empty") {}
};

class DelayOutOfRange : public Error {
public:
    explicit DelayOutOfRange(const std::string& what) : Error(Kind::DelayOutOfRange, what) {}
};

class DegenerateDenominator : public Error {
public:
    DegenerateDenominator()
        : Error(Kind::DegenerateDenominator, "coincidence denominator vanishes (no light)")
    {
    }
};

class InvariantViolation : public Error {
public:
    explicit InvariantViolation(const std::string& what)
        : Error(Kind::InvariantViolation, what)
    {
    }
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(Kind::Io, what) {}
};

} // namespace sps
