#include "bcn/midi.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <map>
#include <string>

#include "bcn/error.hpp"

namespace bcn {

namespace {

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool done() const { return pos_ >= bytes_.size(); }
  std::size_t pos() const { return pos_; }

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint8_t peek() {
    need(1);
    return bytes_[pos_];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>((bytes_[pos_] << 8) | bytes_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | bytes_[pos_++];
    return v;
  }
  std::uint32_t vlq() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      std::uint8_t b = u8();
      v = (v << 7) | (b & 0x7F);
      if ((b & 0x80) == 0) return v;
    }
    throw Error(Errc::MalformedMidi, "variable-length quantity longer than 4 bytes");
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(Errc::MalformedMidi, "truncated data");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

struct PendingNote {
  long onset;
  int velocity;
};

struct Voice {
  int chunk = 0;
  int channel = 0;
  int program = -1;
  std::vector<Note> notes;
};

bool names_melody(const std::string& name) {
  std::string lower;
  for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return lower.find("melody") != std::string::npos;
}

void parse_track_chunk(std::span<const std::uint8_t> data, int chunk,
                       std::map<std::pair<int, int>, Voice>& voices,
                       std::vector<std::pair<int, int>>& order, std::string& track_name) {
  Reader r(data);
  long tick = 0;
  std::uint8_t running = 0;
  std::map<std::pair<int, int>, std::deque<PendingNote>> open;  // (channel, pitch)
  std::array<int, 16> programs;
  programs.fill(-1);

  auto voice_for = [&](int channel) -> Voice& {
    auto key = std::make_pair(chunk, channel);
    auto it = voices.find(key);
    if (it == voices.end()) {
      order.push_back(key);
      it = voices.emplace(key, Voice{chunk, channel, programs[channel], {}}).first;
    }
    return it->second;
  };
  auto close_note = [&](int channel, int pitch) {
    auto it = open.find({channel, pitch});
    if (it == open.end() || it->second.empty()) return;
    PendingNote p = it->second.front();
    it->second.pop_front();
    Voice& v = voice_for(channel);
    if (v.program < 0) v.program = programs[channel];
    v.notes.push_back(Note{pitch, static_cast<int>(p.onset),
                           static_cast<int>(std::max<long>(1, tick - p.onset)), p.velocity});
  };

  bool ended = false;
  while (!r.done() && !ended) {
    tick += r.vlq();
    std::uint8_t status = r.peek();
    if (status & 0x80) {
      r.u8();
    } else {
      if (running == 0) throw Error(Errc::MalformedMidi, "data byte without running status");
      status = running;
    }

    if (status == 0xFF) {
      std::uint8_t type = r.u8();
      std::uint32_t len = r.vlq();
      auto payload = r.take(len);
      if (type == 0x03) {
        track_name.assign(payload.begin(), payload.end());
      } else if (type == 0x58) {
        if (len < 2) throw Error(Errc::MalformedMidi, "short time signature event");
        if (payload[0] != 4 || payload[1] != 2) {
          throw Error(Errc::UnsupportedTimeSignature,
                      "meter " + std::to_string(payload[0]) + "/" +
                          std::to_string(1 << std::min<int>(payload[1], 30)));
        }
      } else if (type == 0x2F) {
        ended = true;
      }
      running = 0;
      continue;
    }
    if (status == 0xF0 || status == 0xF7) {
      r.take(r.vlq());
      running = 0;
      continue;
    }
    if (status >= 0xF0) throw Error(Errc::MalformedMidi, "unexpected system message in track");

    running = status;
    int kind = status & 0xF0;
    int channel = status & 0x0F;
    switch (kind) {
      case 0x80: {
        int pitch = r.u8() & 0x7F;
        r.u8();
        close_note(channel, pitch);
        break;
      }
      case 0x90: {
        int pitch = r.u8() & 0x7F;
        int vel = r.u8() & 0x7F;
        if (vel == 0) {
          close_note(channel, pitch);
        } else {
          voice_for(channel);
          open[{channel, pitch}].push_back(PendingNote{tick, vel});
        }
        break;
      }
      case 0xA0:
      case 0xB0:
      case 0xE0:
        r.u8();
        r.u8();
        break;
      case 0xC0: {
        int program = r.u8() & 0x7F;
        programs[channel] = program;
        auto it = voices.find({chunk, channel});
        if (it != voices.end() && it->second.program < 0) it->second.program = program;
        break;
      }
      case 0xD0:
        r.u8();
        break;
      default:
        throw Error(Errc::MalformedMidi, "bad status byte");
    }
  }
  // Notes left sounding are closed at the last event time.
  for (auto& [key, queue] : open) {
    while (!queue.empty()) close_note(key.first, key.second);
  }
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>((v >> s) & 0xFF));
}

void put_vlq(std::vector<std::uint8_t>& out, std::uint32_t v) {
  std::uint8_t buf[5];
  int n = 0;
  buf[n++] = v & 0x7F;
  while (v >>= 7) buf[n++] = static_cast<std::uint8_t>((v & 0x7F) | 0x80);
  while (n > 0) out.push_back(buf[--n]);
}

void put_chunk(std::vector<std::uint8_t>& out, const std::vector<std::uint8_t>& body) {
  out.insert(out.end(), {'M', 'T', 'r', 'k'});
  put_u32(out, static_cast<std::uint32_t>(body.size()));
  out.insert(out.end(), body.begin(), body.end());
}

}  // namespace

Song parse_midi(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto magic = r.take(4);
  if (!std::equal(magic.begin(), magic.end(), "MThd")) throw Error(Errc::MalformedMidi, "missing MThd");
  std::uint32_t header_len = r.u32();
  if (header_len < 6) throw Error(Errc::MalformedMidi, "short header");
  std::uint16_t format = r.u16();
  std::uint16_t ntracks = r.u16();
  std::uint16_t division = r.u16();
  r.take(header_len - 6);
  if (format > 1) throw Error(Errc::MalformedMidi, "unsupported format " + std::to_string(format));
  if (division & 0x8000) throw Error(Errc::MalformedMidi, "SMPTE time division unsupported");
  if (division == 0) throw Error(Errc::MalformedMidi, "zero time division");

  std::map<std::pair<int, int>, Voice> voices;
  std::vector<std::pair<int, int>> order;
  std::vector<std::string> chunk_names;
  int chunk = 0;
  while (chunk < ntracks) {
    auto id = r.take(4);
    std::uint32_t len = r.u32();
    auto body = r.take(len);
    if (!std::equal(id.begin(), id.end(), "MTrk")) continue;  // foreign chunk
    std::string name;
    parse_track_chunk(body, chunk, voices, order, name);
    chunk_names.push_back(name);
    ++chunk;
  }

  Song song;
  song.resolution = division;
  long max_onset = -1;
  for (const auto& key : order) {
    Voice& v = voices.at(key);
    if (v.notes.empty()) continue;
    Track t;
    if (v.channel == 9) {
      t.instrument = Instrument::Drum;
      t.program = 0;
    } else {
      t.instrument = Instrument::Piano;  // provisional until compression
      t.program = std::max(0, v.program);
    }
    t.name = chunk_names[static_cast<std::size_t>(v.chunk)];
    t.is_melody = !t.is_drum() && names_melody(t.name);
    t.notes = std::move(v.notes);
    normalize_notes(t);
    for (const auto& n : t.notes) max_onset = std::max<long>(max_onset, n.onset);
    song.tracks.push_back(std::move(t));
  }
  song.n_bars = max_onset < 0 ? 0 : static_cast<int>(max_onset / song.ticks_per_bar()) + 1;
  return song;
}

std::vector<std::uint8_t> write_midi(const Song& song) {
  std::vector<std::uint8_t> out = {'M', 'T', 'h', 'd'};
  put_u32(out, 6);
  put_u16(out, 1);
  put_u16(out, static_cast<std::uint16_t>(song.tracks.size() + 1));
  put_u16(out, static_cast<std::uint16_t>(song.resolution));

  std::vector<std::uint8_t> conductor;
  put_vlq(conductor, 0);
  conductor.insert(conductor.end(), {0xFF, 0x51, 0x03});
  std::uint32_t usec = 60000000u / static_cast<std::uint32_t>(song.bpm);
  conductor.insert(conductor.end(), {static_cast<std::uint8_t>(usec >> 16),
                                     static_cast<std::uint8_t>((usec >> 8) & 0xFF),
                                     static_cast<std::uint8_t>(usec & 0xFF)});
  put_vlq(conductor, 0);
  conductor.insert(conductor.end(), {0xFF, 0x58, 0x04, 4, 2, 24, 8});
  put_vlq(conductor, 0);
  conductor.insert(conductor.end(), {0xFF, 0x2F, 0x00});
  put_chunk(out, conductor);

  int next_channel = 0;
  for (const auto& track : song.tracks) {
    int channel = 9;
    if (!track.is_drum()) {
      channel = next_channel++ % 15;
      if (channel >= 9) ++channel;
    }
    struct Event {
      long tick;
      int order;  // note-offs sort before note-ons at equal ticks
      std::uint8_t a, b, c;
    };
    std::vector<Event> events;
    for (const auto& n : track.notes) {
      events.push_back({n.onset, 1, static_cast<std::uint8_t>(0x90 | channel),
                        static_cast<std::uint8_t>(n.pitch), static_cast<std::uint8_t>(n.velocity)});
      events.push_back({static_cast<long>(n.onset) + n.duration, 0,
                        static_cast<std::uint8_t>(0x80 | channel), static_cast<std::uint8_t>(n.pitch), 0});
    }
    std::stable_sort(events.begin(), events.end(), [](const Event& x, const Event& y) {
      return x.tick != y.tick ? x.tick < y.tick : x.order < y.order;
    });

    std::vector<std::uint8_t> body;
    std::string name = track.is_melody ? std::string("Melody") : track.name;
    if (name.empty()) name = std::string(instrument_name(track.instrument));
    put_vlq(body, 0);
    body.insert(body.end(), {0xFF, 0x03});
    put_vlq(body, static_cast<std::uint32_t>(name.size()));
    body.insert(body.end(), name.begin(), name.end());
    if (!track.is_drum()) {
      put_vlq(body, 0);
      body.push_back(static_cast<std::uint8_t>(0xC0 | channel));
      body.push_back(static_cast<std::uint8_t>(track.program & 0x7F));
    }
    long last = 0;
    for (const auto& e : events) {
      put_vlq(body, static_cast<std::uint32_t>(e.tick - last));
      last = e.tick;
      body.insert(body.end(), {e.a, e.b, e.c});
    }
    put_vlq(body, 0);
    body.insert(body.end(), {0xFF, 0x2F, 0x00});
    put_chunk(out, body);
  }
  return out;
}

}  // namespace bcn
