#pragma once

#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "koop/io/format.hpp"
#include "koop/training/train.hpp"

namespace koop {

inline nlohmann::json to_json(const StageReport& s) {
    return {{"epochs", s.loss_history.size()},
            {"final_loss", s.final_loss},
            {"diverged", s.diverged},
            {"diverged_epoch", s.diverged_epoch}};
}

// Wall-clock times are left out so that reports are reproducible byte for byte.
inline nlohmann::json to_json(const TrainReport& r) {
    nlohmann::json j{{"stage1", to_json(r.stage1)},
                     {"stage2_ran", r.stage2_ran},
                     {"loss_d1", r.loss_d1},
                     {"loss_d2", r.loss_d2},
                     {"loss_full", r.loss_full},
                     {"condition_stage1", r.condition_stage1},
                     {"condition_final", r.condition_final},
                     {"diverged", r.diverged}};
    if (r.stage2_ran) j["stage2"] = to_json(r.stage2);
    return j;
}

// `epoch,stage,loss`, one row per recorded epoch.
inline std::string loss_csv(const TrainReport& r) {
    std::ostringstream os;
    os << "epoch,stage,loss\n";
    for (std::size_t e = 0; e < r.stage1.loss_history.size(); ++e)
        os << e << ",1," << io::fmt(r.stage1.loss_history[e]) << "\n";
    if (r.stage2_ran)
        for (std::size_t e = 0; e < r.stage2.loss_history.size(); ++e)
            os << e << ",2," << io::fmt(r.stage2.loss_history[e]) << "\n";
    return os.str();
}

} // namespace koop
