// Copyright 2026 The kerrcat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kerrcat/core.hpp"

namespace kerrcat {

enum class Channel { pump1, pump2, bell_sum, bell_diff, gate, x_drive1, x_drive2 };

inline constexpr std::array<Channel, 7> kAllChannels = {
    Channel::pump1, Channel::pump2,    Channel::bell_sum, Channel::bell_diff,
    Channel::gate,  Channel::x_drive1, Channel::x_drive2};

inline std::string channel_name(Channel c) {
    switch (c) {
    case Channel::pump1: return "pump1";
    case Channel::pump2: return "pump2";
    case Channel::bell_sum: return "bell_sum";
    case Channel::bell_diff: return "bell_diff";
    case Channel::gate: return "gate";
    case Channel::x_drive1: return "x_drive1";
    case Channel::x_drive2: return "x_drive2";
    }
    return "?";
}

inline Channel channel_from_name(const std::string &name) {
    for (Channel c : kAllChannels)
        if (channel_name(c) == name) return c;
    throw ConfigError("unknown drive channel '" + name + "'");
}

inline bool is_pump(Channel c) { return c == Channel::pump1 || c == Channel::pump2; }

// target * sin^2(pi t / 2 tau) on [0, tau], flat afterwards.
inline double sin2_ramp(double t, double tau_ramp, double target) {
    if (tau_ramp <= 0.0) throw ParameterError("ramp time must be positive");
    if (t <= 0.0) return 0.0;
    if (t >= tau_ramp) return target;
    const double s = std::sin(kPi * t / (2.0 * tau_ramp));
    return target * s * s;
}

inline double chirped_detuning(double t, double tau_ramp, double target) {
    return sin2_ramp(t, tau_ramp, target);
}

inline double square_pulse(double t, double t0, double length, double amplitude, double rise = 0.0) {
    if (length <= 0.0) throw ParameterError("pulse length must be positive");
    if (rise < 0.0 || rise > 0.5 * length) throw ParameterError("rise must lie in [0, length/2]");
    const double u = t - t0;
    if (u < 0.0 || u > length) return 0.0;
    if (rise == 0.0) return amplitude;
    if (u < rise) return sin2_ramp(u, rise, amplitude);
    if (u > length - rise) return sin2_ramp(length - u, rise, amplitude);
    return amplitude;
}

struct Envelope {
    enum class Kind { constant, sin2_ramp, square };

    Kind kind = Kind::constant;
    double value = 0.0; // MHz
    double time = 0.0;  // ramp time (sin2_ramp) or edge width (square), us

    static Envelope constant(double v) { return {Kind::constant, v, 0.0}; }
    static Envelope ramp(double target, double tau) { return {Kind::sin2_ramp, target, tau}; }
    static Envelope square(double amplitude, double rise = 0.0) {
        return {Kind::square, amplitude, rise};
    }

    // u is time since segment start, clamped by the caller to [0, length].
    double eval(double u, double length) const {
        switch (kind) {
        case Kind::constant: return value;
        case Kind::sin2_ramp: return sin2_ramp(u, time, value);
        case Kind::square: return square_pulse(u, 0.0, length, value, time);
        }
        return 0.0;
    }

    bool identically_zero() const { return value == 0.0; }

    bool operator==(const Envelope &) const = default;
};

inline std::string envelope_kind_name(Envelope::Kind k) {
    switch (k) {
    case Envelope::Kind::constant: return "constant";
    case Envelope::Kind::sin2_ramp: return "sin2_ramp";
    case Envelope::Kind::square: return "square";
    }
    return "?";
}

inline Envelope::Kind envelope_kind_from_name(const std::string &s) {
    if (s == "constant") return Envelope::Kind::constant;
    if (s == "sin2_ramp") return Envelope::Kind::sin2_ramp;
    if (s == "square") return Envelope::Kind::square;
    throw ConfigError("unknown envelope kind '" + s + "'");
}

// One drive segment. For pump channels `detuning` is the KPO-pump detuning
// Delta_i(t); for the other channels it is the drive detuning.
struct DriveSpec {
    Channel channel = Channel::pump1;
    double t_start = 0.0;
    double t_end = 0.0;
    Envelope amplitude;
    Envelope detuning;
    double phase = 0.0;

    double length() const { return t_end - t_start; }
    double local(double t) const { return std::clamp(t - t_start, 0.0, length()); }
    double amplitude_at(double t) const { return amplitude.eval(local(t), length()); }
    double detuning_at(double t) const { return detuning.eval(local(t), length()); }
    bool contains(double t) const { return t >= t_start && t < t_end; }

    bool operator==(const DriveSpec &) const = default;
};

struct DriveValue {
    double amplitude = 0.0;
    double detuning = 0.0;
    double phase = 0.0;
};

class PulseSchedule {
  public:
    PulseSchedule() = default;
    explicit PulseSchedule(double total_duration) : total_duration_(total_duration) {}

    PulseSchedule &add(const DriveSpec &seg) {
        if (!(seg.t_end > seg.t_start) || seg.t_start < 0.0)
            throw ScheduleError("segment on " + channel_name(seg.channel) +
                                " has an empty or negative time window");
        for (const DriveSpec &s : segments_) {
            if (s.channel == seg.channel && seg.t_start < s.t_end && s.t_start < seg.t_end)
                throw ScheduleError("overlapping segments on channel " + channel_name(seg.channel));
        }
        segments_.push_back(seg);
        total_duration_ = std::max(total_duration_, seg.t_end);
        return *this;
    }

    const std::vector<DriveSpec> &segments() const { return segments_; }
    double total_duration() const { return total_duration_; }
    void set_total_duration(double t) {
        if (t < 0.0) throw ScheduleError("negative schedule duration");
        total_duration_ = t;
    }

    // Segment active on `channel` at t; half-open windows [t_start, t_end).
    const DriveSpec *find(Channel channel, double t) const {
        for (const DriveSpec &s : segments_)
            if (s.channel == channel && s.contains(t)) return &s;
        return nullptr;
    }

    std::optional<DriveValue> evaluate(Channel channel, double t) const {
        const DriveSpec *s = find(channel, t);
        if (!s) return std::nullopt;
        return DriveValue{s->amplitude_at(t), s->detuning_at(t), s->phase};
    }

    double amplitude(Channel channel, double t) const {
        auto v = evaluate(channel, t);
        return v ? v->amplitude : 0.0;
    }

    std::vector<const DriveSpec *> active(double t) const {
        std::vector<const DriveSpec *> out;
        for (const DriveSpec &s : segments_)
            if (s.contains(t)) out.push_back(&s);
        return out;
    }

    std::vector<double> breakpoints() const {
        std::vector<double> b{0.0, total_duration_};
        for (const DriveSpec &s : segments_) {
            b.push_back(s.t_start);
            b.push_back(s.t_end);
        }
        std::sort(b.begin(), b.end());
        b.erase(std::unique(b.begin(), b.end()), b.end());
        return b;
    }

    // Phase changes on the gate channel while a pump is running.
    std::vector<std::string> lint() const {
        std::vector<std::string> warnings;
        std::vector<const DriveSpec *> gates;
        for (const DriveSpec &s : segments_)
            if (s.channel == Channel::gate) gates.push_back(&s);
        std::sort(gates.begin(), gates.end(),
                  [](auto *a, auto *b) { return a->t_start < b->t_start; });
        for (std::size_t i = 1; i < gates.size(); ++i) {
            if (gates[i]->phase == gates[i - 1]->phase) continue;
            const double t = gates[i]->t_start;
            const bool pumped = (find(Channel::pump1, t) && !find(Channel::pump1, t)->amplitude.identically_zero()) ||
                                (find(Channel::pump2, t) && !find(Channel::pump2, t)->amplitude.identically_zero());
            if (pumped)
                warnings.push_back("gate phase changes at t = " + std::to_string(t) +
                                   " us while pumps are on; the pump phase is the cat-basis reference");
        }
        return warnings;
    }

    bool operator==(const PulseSchedule &) const = default;

    void write_csv(const std::string &path, double dt = 0.001) const {
        std::ofstream f(path);
        if (!f) throw Error("cannot write " + path);
        f << "t_us,channel,amplitude_MHz,detuning_MHz,phase_rad\n";
        f.precision(12);
        std::vector<Channel> used;
        for (Channel c : kAllChannels)
            for (const DriveSpec &s : segments_)
                if (s.channel == c) {
                    used.push_back(c);
                    break;
                }
        const long steps = std::lround(total_duration_ / dt);
        for (long k = 0; k <= steps; ++k) {
            const double t = k * dt;
            for (Channel c : used) {
                auto v = evaluate(c, t);
                DriveValue dv = v.value_or(DriveValue{});
                f << t << ',' << channel_name(c) << ',' << dv.amplitude << ',' << dv.detuning << ','
                  << dv.phase << '\n';
            }
        }
    }

  private:
    std::vector<DriveSpec> segments_;
    double total_duration_ = 0.0;
};

inline void to_json(nlohmann::json &j, const Envelope &e) {
    j = nlohmann::json{{"kind", envelope_kind_name(e.kind)}, {"value", e.value}, {"time", e.time}};
}

inline void from_json(const nlohmann::json &j, Envelope &e) {
    e.kind = envelope_kind_from_name(j.at("kind").get<std::string>());
    e.value = j.value("value", 0.0);
    e.time = j.value("time", 0.0);
}

inline void to_json(nlohmann::json &j, const DriveSpec &s) {
    j = nlohmann::json{{"channel", channel_name(s.channel)},
                       {"t_start", s.t_start},
                       {"t_end", s.t_end},
                       {"amplitude", s.amplitude},
                       {"detuning", s.detuning},
                       {"phase", s.phase}};
}

inline void from_json(const nlohmann::json &j, DriveSpec &s) {
    s.channel = channel_from_name(j.at("channel").get<std::string>());
    s.t_start = j.at("t_start").get<double>();
    s.t_end = j.at("t_end").get<double>();
    s.amplitude = j.at("amplitude").get<Envelope>();
    s.detuning = j.contains("detuning") ? j.at("detuning").get<Envelope>() : Envelope{};
    s.phase = j.value("phase", 0.0);
}

inline void to_json(nlohmann::json &j, const PulseSchedule &p) {
    j = nlohmann::json{{"total_duration", p.total_duration()}, {"segments", p.segments()}};
}

inline void from_json(const nlohmann::json &j, PulseSchedule &p) {
    p = PulseSchedule();
    for (const auto &s : j.at("segments")) p.add(s.get<DriveSpec>());
    if (j.contains("total_duration")) p.set_total_duration(j.at("total_duration").get<double>());
}

struct PresetOptions {
    double tau_ramp = 1.0;
    double hold = 0.0;
    double pump1 = 2.0; // MHz
    double pump2 = 2.0;
    double delta1 = 1.0; // MHz, chirp target
    double delta2 = 1.0;
    bool chirp = true;

    Channel bell_channel = Channel::bell_sum;
    double bell_length = 0.730;
    double bell_amplitude = 1.0 / (4.0 * 0.730);
    double bell_detuning = 0.0;
    double bell_phase = -0.5 * kPi;
    double bell_rise = 0.0;

    double gate_length = 0.275;
    double gate_amplitude = 2.96;
    double gate_detuning = 0.0;
    double gate_phase = 0.0;
    double gate_rise = 0.0;

    double tail = 0.0; // idle time appended at the end with pumps held
};

inline void to_json(nlohmann::json &j, const PresetOptions &o) {
    j = nlohmann::json{{"tau_ramp", o.tau_ramp},         {"hold", o.hold},
                       {"pump1", o.pump1},               {"pump2", o.pump2},
                       {"delta1", o.delta1},             {"delta2", o.delta2},
                       {"chirp", o.chirp},               {"bell_channel", channel_name(o.bell_channel)},
                       {"bell_length", o.bell_length},   {"bell_amplitude", o.bell_amplitude},
                       {"bell_detuning", o.bell_detuning}, {"bell_phase", o.bell_phase},
                       {"bell_rise", o.bell_rise},       {"gate_length", o.gate_length},
                       {"gate_amplitude", o.gate_amplitude}, {"gate_detuning", o.gate_detuning},
                       {"gate_phase", o.gate_phase},     {"gate_rise", o.gate_rise},
                       {"tail", o.tail}};
}

inline void from_json(const nlohmann::json &j, PresetOptions &o) {
    static const std::vector<std::string> known = {
        "tau_ramp",      "hold",          "pump1",      "pump2",        "delta1",
        "delta2",        "chirp",         "bell_channel", "bell_length", "bell_amplitude",
        "bell_detuning", "bell_phase",    "bell_rise",  "gate_length",  "gate_amplitude",
        "gate_detuning", "gate_phase",    "gate_rise",  "tail"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw ConfigError("unknown schedule option '" + it.key() + "'");
    o.tau_ramp = j.value("tau_ramp", o.tau_ramp);
    o.hold = j.value("hold", o.hold);
    o.pump1 = j.value("pump1", o.pump1);
    o.pump2 = j.value("pump2", o.pump2);
    o.delta1 = j.value("delta1", o.delta1);
    o.delta2 = j.value("delta2", o.delta2);
    o.chirp = j.value("chirp", o.chirp);
    if (j.contains("bell_channel")) o.bell_channel = channel_from_name(j.at("bell_channel"));
    o.bell_length = j.value("bell_length", o.bell_length);
    o.bell_amplitude = j.value("bell_amplitude", o.bell_amplitude);
    o.bell_detuning = j.value("bell_detuning", o.bell_detuning);
    o.bell_phase = j.value("bell_phase", o.bell_phase);
    o.bell_rise = j.value("bell_rise", o.bell_rise);
    o.gate_length = j.value("gate_length", o.gate_length);
    o.gate_amplitude = j.value("gate_amplitude", o.gate_amplitude);
    o.gate_detuning = j.value("gate_detuning", o.gate_detuning);
    o.gate_phase = j.value("gate_phase", o.gate_phase);
    o.gate_rise = j.value("gate_rise", o.gate_rise);
    o.tail = j.value("tail", o.tail);
}

namespace detail {

inline void add_pump_ramps(PulseSchedule &s, const PresetOptions &o, double t0, double t1) {
    const double pumps[2] = {o.pump1, o.pump2};
    const double deltas[2] = {o.delta1, o.delta2};
    const Channel ch[2] = {Channel::pump1, Channel::pump2};
    for (int i = 0; i < 2; ++i) {
        DriveSpec d;
        d.channel = ch[i];
        d.t_start = t0;
        d.t_end = t1;
        d.amplitude = Envelope::ramp(pumps[i], o.tau_ramp);
        d.detuning = o.chirp ? Envelope::ramp(deltas[i], o.tau_ramp) : Envelope::constant(deltas[i]);
        s.add(d);
    }
}

// Zero-amplitude pump segments pin Delta_i = 0 while Fock states are prepared.
inline void add_idle_pumps(PulseSchedule &s, double t0, double t1) {
    for (Channel c : {Channel::pump1, Channel::pump2}) {
        DriveSpec d;
        d.channel = c;
        d.t_start = t0;
        d.t_end = t1;
        d.amplitude = Envelope::constant(0.0);
        d.detuning = Envelope::constant(0.0);
        s.add(d);
    }
}

inline void add_bell(PulseSchedule &s, const PresetOptions &o) {
    if (o.bell_channel != Channel::bell_sum && o.bell_channel != Channel::bell_diff)
        throw ConfigError("bell_channel must be bell_sum or bell_diff");
    DriveSpec d;
    d.channel = o.bell_channel;
    d.t_start = 0.0;
    d.t_end = o.bell_length;
    d.amplitude = Envelope::square(o.bell_amplitude, o.bell_rise);
    d.detuning = Envelope::constant(o.bell_detuning);
    d.phase = o.bell_phase;
    s.add(d);
}

} // namespace detail

inline PulseSchedule preset_schedule(const std::string &name, const PresetOptions &o = {}) {
    if (o.tau_ramp <= 0.0 || o.hold < 0.0 || o.tail < 0.0)
        throw ConfigError("ramp time must be positive and hold/tail nonnegative");
    PulseSchedule s;
    const double ramp_end = o.tau_ramp + o.hold;
    if (name == "cat_gen") {
        detail::add_pump_ramps(s, o, 0.0, ramp_end + o.tail);
    } else if (name == "bell_fock") {
        detail::add_bell(s, o);
        detail::add_idle_pumps(s, 0.0, o.bell_length + o.tail);
    } else if (name == "fock_to_cat") {
        detail::add_bell(s, o);
        detail::add_idle_pumps(s, 0.0, o.bell_length);
        detail::add_pump_ramps(s, o, o.bell_length, o.bell_length + ramp_end + o.tail);
    } else if (name == "two_cat_gate") {
        const double gate_end = ramp_end + o.gate_length;
        detail::add_pump_ramps(s, o, 0.0, gate_end + o.tail);
        DriveSpec g;
        g.channel = Channel::gate;
        g.t_start = ramp_end;
        g.t_end = gate_end;
        g.amplitude = Envelope::square(o.gate_amplitude, o.gate_rise);
        g.detuning = Envelope::constant(o.gate_detuning);
        g.phase = o.gate_phase;
        s.add(g);
    } else {
        throw ConfigError("unknown preset schedule '" + name + "'");
    }
    return s;
}

} // namespace kerrcat
