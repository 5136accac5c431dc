#pragma once

// Common result record for every estimator: fitted values plus the tuning
// value, truth MSE (filled by the harness when the truth is known), a
// degree-of-freedom figure, and an active-set count where the method has one.

#include <cstdio>
#include <limits>
#include <string>

#include "pnreg/numkern.hpp"

namespace pnreg {

struct FitResult {
    Vector yhat;
    double tuning = 0.0;
    double mse_truth = std::numeric_limits<double>::quiet_NaN();
    double dof_hat = std::numeric_limits<double>::quiet_NaN();
    double active = std::numeric_limits<double>::quiet_NaN();
    std::string method;
};

inline constexpr const char* kFitResultCsvHeader = "method,tuning,mse_truth,dof,active";

// One CSV row per the header above, %.17g so reruns are byte-identical.
inline std::string fit_result_csv_row(const FitResult& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g", r.method.c_str(), r.tuning,
                  r.mse_truth, r.dof_hat, r.active);
    return std::string(buf);
}

}  // namespace pnreg
