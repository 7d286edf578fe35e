#include "toolwatch/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

namespace toolwatch::dataset {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

bool parse_double(std::string_view text, double& out) {
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

struct Moments {
    double mean = 0.0;
    double stddev = 0.0;  // population
};

Moments moments(std::span<const double> x) {
    Moments m;
    if (x.empty()) return m;
    m.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - m.mean) * (v - m.mean);
    m.stddev = std::sqrt(ss / static_cast<double>(x.size()));
    return m;
}

}  // namespace

Direction parse_direction(std::string_view text) {
    text = trim(text);
    if (text == "X" || text == "x") return Direction::X;
    if (text == "Y" || text == "y") return Direction::Y;
    throw Error("direction must be X or Y, got '" + std::string(text) + "'");
}

char direction_char(Direction d) { return d == Direction::X ? 'X' : 'Y'; }

void GeneratorConfig::validate() const {
    if (windows_per_class == 0) throw Error("generator: windows_per_class must be positive");
    if (window_length == 0) throw Error("generator: window_length must be positive");
    if (!(sampling_rate_hz > 0.0)) throw Error("generator: sampling rate must be positive");
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        const auto& p = classes[c];
        if (!std::isfinite(p.mean) || !(p.stddev > 0.0) || !std::isfinite(p.stddev)) {
            throw Error("generator: class " + std::to_string(c) + " needs finite mean and std > 0");
        }
        if (!(p.ar_coefficient >= 0.0 && p.ar_coefficient < 1.0)) {
            throw Error("generator: class " + std::to_string(c) + " AR coefficient outside [0, 1)");
        }
        if (!(std::abs(p.skew) <= 1.0)) {
            throw Error("generator: class " + std::to_string(c) + " skew outside [-1, 1]");
        }
    }
    if (sessions_per_class == 0 || sessions_per_class > windows_per_class) {
        throw Error("generator: sessions_per_class must be in [1, windows_per_class]");
    }
    if (!(session_mean_spread >= 0.0) || !(session_std_spread >= 0.0) || !std::isfinite(session_mean_spread) ||
        !std::isfinite(session_std_spread)) {
        throw Error("generator: session spreads must be finite and non-negative");
    }
    if (!allow_identical_classes) {
        for (std::size_t a = 0; a < kNumClasses; ++a) {
            for (std::size_t b = a + 1; b < kNumClasses; ++b) {
                const auto& pa = classes[a];
                const auto& pb = classes[b];
                if (pa.mean == pb.mean && pa.stddev == pb.stddev && pa.skew == pb.skew) {
                    throw Error("generator: classes " + std::to_string(a) + " and " +
                                std::to_string(b) + " share mean/std/skew");
                }
            }
        }
    }
}

SignalSeries load_signal(const std::filesystem::path& path, Direction direction) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read signal file " + path.string());

    SignalSeries series;
    series.direction = direction;
    series.source_id = path.filename().string();

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty() || text.front() == '#') continue;
        double value = 0.0;
        if (!parse_double(text, value) || !std::isfinite(value)) {
            throw Error(path.string() + ":" + std::to_string(line_no) + ": not a finite number: '" +
                        std::string(text) + "'");
        }
        series.samples.push_back(value);
    }
    if (series.samples.empty()) throw Error("signal file " + path.string() + " has no samples");
    return series;
}

void save_signal(const SignalSeries& series, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write signal file " + path.string());
    out << "# force_N direction=" << direction_char(series.direction)
        << " sampling_rate_hz=" << series.sampling_rate_hz << '\n';
    out << std::setprecision(17);
    for (double v : series.samples) out << v << '\n';
    if (!out) throw Error("write failed for " + path.string());
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read manifest " + path.string());
    const auto base = path.parent_path();

    std::vector<ManifestEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty() || text.front() == '#') continue;

        std::vector<std::string> fields;
        std::stringstream ss{std::string(text)};
        std::string field;
        while (std::getline(ss, field, ',')) fields.emplace_back(trim(field));
        if (fields.size() != 3) {
            throw Error(path.string() + ":" + std::to_string(line_no) +
                        ": expected <path>,<X|Y>,<0|1|2>");
        }
        ManifestEntry e;
        e.path = fields[0];
        if (e.path.is_relative()) e.path = base / e.path;
        try {
            e.direction = parse_direction(fields[1]);
            e.label = parse_condition(fields[2]);
        } catch (const Error& err) {
            throw Error(path.string() + ":" + std::to_string(line_no) + ": " + err.what());
        }
        entries.push_back(std::move(e));
    }
    if (entries.empty()) throw Error("manifest " + path.string() + " lists no files");
    return entries;
}

void save_manifest(std::span<const ManifestEntry> entries, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write manifest " + path.string());
    const auto base = path.parent_path();
    for (const auto& e : entries) {
        auto p = e.path;
        if (!base.empty() && p.parent_path() == base) p = p.filename();
        out << p.string() << ',' << direction_char(e.direction) << ',' << severity(e.label) << '\n';
    }
}

OutlierResult remove_outliers(const SignalSeries& series, double z_threshold) {
    if (!(z_threshold > 0.0)) throw Error("remove_outliers: z_threshold must be positive");
    if (series.samples.size() < 3) throw Error("remove_outliers: need at least 3 samples");

    const auto m = moments(series.samples);
    OutlierResult result{series, 0};
    if (m.stddev == 0.0) return result;

    const double band = z_threshold * m.stddev;
    auto& kept = result.series.samples;
    kept.clear();
    for (double v : series.samples) {
        if (std::abs(v - m.mean) <= band) kept.push_back(v);
    }
    result.removed_count = series.samples.size() - kept.size();
    return result;
}

std::vector<Window> make_windows(const SignalSeries& series, std::size_t window_length,
                                 std::size_t stride) {
    if (window_length < kMinWindowLength) {
        throw Error("make_windows: window_length must be at least " +
                    std::to_string(kMinWindowLength));
    }
    if (stride == 0) throw Error("make_windows: stride must be positive");
    if (!series.label) throw Error("make_windows: series '" + series.source_id + "' is unlabeled");
    const std::size_t n = series.samples.size();
    if (n < window_length) {
        throw Error("make_windows: series '" + series.source_id + "' has " + std::to_string(n) +
                    " samples, shorter than window length " + std::to_string(window_length));
    }

    std::vector<Window> windows;
    windows.reserve((n - window_length) / stride + 1);
    for (std::size_t start = 0; start + window_length <= n; start += stride) {
        Window w;
        w.samples.assign(series.samples.begin() + static_cast<std::ptrdiff_t>(start),
                         series.samples.begin() + static_cast<std::ptrdiff_t>(start + window_length));
        w.source_id = series.source_id + "@" + std::to_string(start);
        w.label = *series.label;
        windows.push_back(std::move(w));
    }
    return windows;
}

std::vector<Window> augment(std::span<const Window> windows, std::size_t target_count,
                            std::uint64_t rng_seed) {
    if (windows.empty()) throw Error("augment: no windows");
    const std::size_t n = windows.size();
    if (target_count < n) {
        throw Error("augment: target " + std::to_string(target_count) + " below input count " +
                    std::to_string(n));
    }

    std::vector<Window> out(windows.begin(), windows.end());
    const std::size_t extra = target_count - n;
    if (extra == 0) return out;

    std::array<std::vector<std::size_t>, kNumClasses> by_class;
    for (std::size_t i = 0; i < n; ++i) by_class[severity(windows[i].label)].push_back(i);

    // Largest-remainder allocation keeps final class shares within one window of exact.
    std::array<std::size_t, kNumClasses> quota{};
    std::array<double, kNumClasses> remainder{};
    std::size_t allocated = 0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        const double exact = static_cast<double>(extra) * static_cast<double>(by_class[c].size()) /
                             static_cast<double>(n);
        quota[c] = static_cast<std::size_t>(std::floor(exact));
        remainder[c] = exact - static_cast<double>(quota[c]);
        allocated += quota[c];
    }
    std::array<std::size_t, kNumClasses> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t i = 0; allocated < extra; ++i) {
        if (by_class[order[i % kNumClasses]].empty()) continue;
        ++quota[order[i % kNumClasses]];
        ++allocated;
    }

    std::mt19937_64 rng(rng_seed);
    std::vector<std::size_t> sources;
    sources.reserve(extra);
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        auto pool = by_class[c];
        for (std::size_t made = 0; made < quota[c];) {
            std::shuffle(pool.begin(), pool.end(), rng);
            for (std::size_t j = 0; j < pool.size() && made < quota[c]; ++j, ++made) {
                sources.push_back(pool[j]);
            }
        }
    }
    std::shuffle(sources.begin(), sources.end(), rng);

    std::normal_distribution<double> noise(0.0, 1.0);
    std::size_t serial = 0;
    for (std::size_t src : sources) {
        const Window& base = windows[src];
        const double sigma = kJitterFraction * moments(base.samples).stddev;
        Window w;
        w.label = base.label;
        w.source_id = base.source_id + "+jitter" + std::to_string(serial++);
        w.samples.reserve(base.samples.size());
        for (double v : base.samples) w.samples.push_back(v + sigma * noise(rng));
        out.push_back(std::move(w));
    }
    return out;
}

std::vector<SignalSeries> synthesize(const GeneratorConfig& config) {
    config.validate();

    std::mt19937_64 rng(config.rng_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);

    std::vector<SignalSeries> out;
    out.reserve(kNumClasses * config.windows_per_class);
    for (ToolCondition label : kAllConditions) {
        const auto& p = config.classes[severity(label)];
        // Innovation: sqrt(1-a^2)*N(0,1) + a*sign(skew)*(Exp(1)-1). Unit variance,
        // third moment 2*a^3*sign(skew).
        const double a = std::abs(p.skew);
        const double sign = p.skew < 0.0 ? -1.0 : 1.0;
        const double gauss_weight = std::sqrt(1.0 - a * a);
        const double phi = p.ar_coefficient;
        const double innovation_scale = std::sqrt(1.0 - phi * phi);
        auto innovation = [&] {
            const double g = gauss(rng);
            const double e = expo(rng) - 1.0;
            return gauss_weight * g + a * sign * e;
        };

        std::vector<std::pair<double, double>> sessions;  // (mean, stddev)
        for (std::size_t k = 0; k < config.sessions_per_class; ++k) {
            if (config.sessions_per_class == 1) {
                sessions.emplace_back(p.mean, p.stddev);
                continue;
            }
            const double m = p.mean + config.session_mean_spread * gauss(rng);
            const double sd = p.stddev * std::max(0.05, 1.0 + config.session_std_spread * gauss(rng));
            sessions.emplace_back(m, sd);
        }

        for (std::size_t w = 0; w < config.windows_per_class; ++w) {
            const std::size_t session = w * config.sessions_per_class / config.windows_per_class;
            const auto [mean, stddev] = sessions[session];
            SignalSeries s;
            s.sampling_rate_hz = config.sampling_rate_hz;
            s.direction = config.direction;
            s.label = label;
            s.source_id = std::string(key_name(label)) + "/run" + std::to_string(session) + "#" + std::to_string(w);
            s.samples.reserve(config.window_length);
            double state = stddev * innovation();
            for (std::size_t t = 0; t < config.window_length; ++t) {
                if (t > 0) state = phi * state + innovation_scale * stddev * innovation();
                s.samples.push_back(mean + state);
            }
            out.push_back(std::move(s));
        }
    }
    return out;
}

}  // namespace toolwatch::dataset
