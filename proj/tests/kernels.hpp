#pragma once

#include <string>

// Small hand-written ABK kernels shared by the unit tests.

namespace kernels {

// Two-stage XOR/add pipeline over buffers data -> buf -> buf, with key[0]
// relevant in the first stage.
inline const char* kTwoStage = R"(
const BS = 8;
const UF = 2;
const US = BS / UF;
var data[BS]: 4;
var buf[UF][US]: 4;
var key[2]: 4;

%IN_SIZE 1
%IN_BATCH_SIZE BS / IN_SIZE
%BATCH_MEM_IN data
%IN_ALLOC_RULE in(x) addr range = [x * IN_SIZE : (x + 1) * IN_SIZE]
%REL key[0]
// ===ACC1 START===
for j in 0..UF {
  for k in 0..US {
    buf[j][k] := data[j * US + k] ^ key[0];
  }
}
// ===ACC1 END===
%OUT_SIZE 1
%OUT_BATCH_SIZE BS / OUT_SIZE
%BATCH_MEM_OUT buf
%OUT_ALLOC_RULE out(x) addr range = [x / US][x % US : x % US + 1]

%IN_SIZE 1
%IN_BATCH_SIZE BS / IN_SIZE
%BATCH_MEM_IN buf
%IN_ALLOC_RULE in(x) addr range = [x / US][x % US : x % US + 1]
// ===ACC2 START===
for j in 0..UF {
  for k in 0..US {
    buf[j][k] := buf[j][k] + 3;
  }
}
// ===ACC2 END===
%OUT_SIZE 1
%OUT_BATCH_SIZE BS / OUT_SIZE
%BATCH_MEM_OUT buf
%OUT_ALLOC_RULE out(x) addr range = [x / US][x % US : x % US + 1]
)";

// Single block, two words per lane, uses an accumulator that persists.
inline const char* kAccumulate = R"(
var d[4]: 4;
var o[2]: 4;
var acc: 4;

%IN_SIZE 2
%IN_BATCH_SIZE 2
%BATCH_MEM_IN d
%IN_ALLOC_RULE in(x) = [2 * x : 2 * x + 2]
%REL acc
// ===ACC1 START===
for j in 0..2 {
  o[j] := d[2 * j] + d[2 * j + 1] + acc;
}
acc := acc + 1;
// ===ACC1 END===
%OUT_SIZE 1
%OUT_BATCH_SIZE 2
%BATCH_MEM_OUT o
%OUT_ALLOC_RULE out(x) = [x : x + 1]
)";

// Two blocks writing disjoint halves of one output buffer.
inline const char* kParallelHalves = R"(
var d[4]: 2;
var o[4]: 2;

%IN_SIZE 1
%IN_BATCH_SIZE 2
%BATCH_MEM_IN d
%IN_ALLOC_RULE in(x) = [x : x + 1]
// ===ACC1 START===
for j in 0..2 {
  o[j] := d[j] + 1;
}
// ===ACC1 END===
%OUT_SIZE 1
%OUT_BATCH_SIZE 2
%BATCH_MEM_OUT o
%OUT_ALLOC_RULE out(x) = [x : x + 1]

%IN_SIZE 1
%IN_BATCH_SIZE 2
%BATCH_MEM_IN d
%IN_ALLOC_RULE in(x) = [x + 2 : x + 3]
// ===ACC2 START===
for j in 2..4 {
  o[j] := d[j] + 1;
}
// ===ACC2 END===
%OUT_SIZE 1
%OUT_BATCH_SIZE 2
%BATCH_MEM_OUT o
%OUT_ALLOC_RULE out(x) = [x + 2 : x + 3]
)";

// Same shape as kParallelHalves, fused into one block over all four lanes.
inline const char* kParallelFused = R"(
var d[4]: 2;
var o[4]: 2;

%IN_SIZE 1
%IN_BATCH_SIZE 4
%BATCH_MEM_IN d
%IN_ALLOC_RULE in(x) = [x : x + 1]
// ===ACC1 START===
for j in 0..4 {
  o[j] := d[j] + 1;
}
// ===ACC1 END===
%OUT_SIZE 1
%OUT_BATCH_SIZE 4
%BATCH_MEM_OUT o
%OUT_ALLOC_RULE out(x) = [x : x + 1]
)";

// The AES-style example with its buffer geometry: 4096 words, 16
// words per element, two unrolled halves.
inline const char* kAesShape = R"(
const BS = 1 << 12;
const UF = 2;
const US = BS / UF;
const i = 0;
var data[BS]: 8;
var buf[UF][US]: 8;
var key[2]: 8;

%IN_SIZE 16
%IN_BATCH_SIZE BS / IN_SIZE
%BATCH_MEM_IN data
%IN_ALLOC_RULE in(x) addr range =
  [i * BS + x * IN_SIZE :
   i * BS + (x + 1) * IN_SIZE]
%REL key[0]
// ===ACC1 START===
for j in 0..UF {
  for k in 0..US {
    buf[j][k] := data[i * BS + j * US + k] ^ key[0];
  }
}
// ===ACC1 END===
%OUT_SIZE 16
%OUT_BATCH_SIZE BS / OUT_SIZE
%BATCH_MEM_OUT buf
%IN_ALLOC_RULE out(x) addr range =
  [x * OUT_SIZE / US][(x * OUT_SIZE) % US :
  (x * OUT_SIZE) % US + OUT_SIZE]

%IN_SIZE 16
%IN_BATCH_SIZE BS / IN_SIZE
%BATCH_MEM_IN buf
%IN_ALLOC_RULE in(x) addr range =
  [x * IN_SIZE / US][(x * IN_SIZE) % US : (x * IN_SIZE) % US + IN_SIZE]
%REL key[0]
// ===ACC2 START===
for j in 0..UF {
  for k in 0..US {
    buf[j][k] := (buf[j][k] << 1) ^ key[0];
  }
}
// ===ACC2 END===
%OUT_SIZE 16
%OUT_BATCH_SIZE BS / OUT_SIZE
%BATCH_MEM_OUT buf
%OUT_ALLOC_RULE out(x) addr range =
  [x * OUT_SIZE / US][(x * OUT_SIZE) % US : (x * OUT_SIZE) % US + OUT_SIZE]
)";

} // namespace kernels

namespace kernels {

// Two-lane, 2-bit kernels for the engine tests.

inline const char* kIdentity = R"(
var d[2]: 2;
var o[2]: 2;
%IN_SIZE 1
%IN_BATCH_SIZE 2
%BATCH_MEM_IN d
%IN_ALLOC_RULE in(x) = [x : x + 1]
// ===ACC1 START===
for j in 0..2 {
  o[j] := d[j];
}
// ===ACC1 END===
%OUT_SIZE 1
%OUT_BATCH_SIZE 2
%BATCH_MEM_OUT o
%OUT_ALLOC_RULE out(x) = [x : x + 1]
)";

// Lane 1 also sees lane 0's word; `junk` is read but never matters.
inline const char* kCrossLane = R"(
var d[2]: 2;
var o[2]: 2;
var junk: 2;
var t: 2;
%IN_SIZE 1
%IN_BATCH_SIZE 2
%BATCH_MEM_IN d
%IN_ALLOC_RULE in(x) = [x : x + 1]
// ===ACC1 START===
t := junk;
o[0] := d[0];
o[1] := d[1] + d[0];
// ===ACC1 END===
%OUT_SIZE 1
%OUT_BATCH_SIZE 2
%BATCH_MEM_OUT o
%OUT_ALLOC_RULE out(x) = [x : x + 1]
)";

// Outputs depend on a counter that is not declared relevant.
inline const char* kHiddenCounter = R"(
var d[2]: 2;
var o[2]: 2;
var cnt: 2;
%IN_SIZE 1
%IN_BATCH_SIZE 2
%BATCH_MEM_IN d
%IN_ALLOC_RULE in(x) = [x : x + 1]
// ===ACC1 START===
for j in 0..2 {
  o[j] := d[j] + cnt;
}
cnt := cnt + 1;
// ===ACC1 END===
%OUT_SIZE 1
%OUT_BATCH_SIZE 2
%BATCH_MEM_OUT o
%OUT_ALLOC_RULE out(x) = [x : x + 1]
)";

// The relevant key is updated from a non-relevant cell.
inline const char* kRelFromHidden = R"(
var d[2]: 2;
var o[2]: 2;
var key: 2;
var h: 2;
%IN_SIZE 1
%IN_BATCH_SIZE 2
%BATCH_MEM_IN d
%IN_ALLOC_RULE in(x) = [x : x + 1]
%REL key
// ===ACC1 START===
for j in 0..2 {
  o[j] := d[j] ^ key;
}
key := key + h;
// ===ACC1 END===
%OUT_SIZE 1
%OUT_BATCH_SIZE 2
%BATCH_MEM_OUT o
%OUT_ALLOC_RULE out(x) = [x : x + 1]
)";

// XOR with a relevant key, with a one-lane SPEC block. `wrong` is added to
// every output; "0" gives the correct kernel.
inline std::string xor_key(const std::string& wrong) {
    return R"(
var d[2]: 2;
var o[2]: 2;
var key: 2;
var sd[1]: 2;
var so[1]: 2;
%IN_SIZE 1
%IN_BATCH_SIZE 2
%BATCH_MEM_IN d
%IN_ALLOC_RULE in(x) = [x : x + 1]
%REL key
// ===ACC1 START===
for j in 0..2 {
  o[j] := (d[j] ^ key) + )" + wrong + R"(;
}
// ===ACC1 END===
%OUT_SIZE 1
%OUT_BATCH_SIZE 2
%BATCH_MEM_OUT o
%OUT_ALLOC_RULE out(x) = [x : x + 1]

%IN_SIZE 1
%IN_BATCH_SIZE 1
%BATCH_MEM_IN sd
%IN_ALLOC_RULE in(x) = [x : x + 1]
%REL key
// ===SPEC START===
so[0] := sd[0] ^ key;
// ===SPEC END===
%OUT_SIZE 1
%OUT_BATCH_SIZE 1
%BATCH_MEM_OUT so
%OUT_ALLOC_RULE out(x) = [x : x + 1]
)";
}

// RB kernels: a countdown loop bounded by the input, and a spin on it.
inline const char* kCountdown = R"(
var d[1]: 2;
var o[1]: 2;
var f: 2;
%IN_SIZE 1
%IN_BATCH_SIZE 1
%BATCH_MEM_IN d
%IN_ALLOC_RULE in(x) = [x : x + 1]
// ===ACC1 START===
f := d[0];
while (f != 0) {
  f := f - 1;
}
o[0] := f;
// ===ACC1 END===
%OUT_SIZE 1
%OUT_BATCH_SIZE 1
%BATCH_MEM_OUT o
%OUT_ALLOC_RULE out(x) = [x : x + 1]
)";

inline const char* kSpin = R"(
var d[1]: 2;
var o[1]: 2;
var f: 2;
%IN_SIZE 1
%IN_BATCH_SIZE 1
%BATCH_MEM_IN d
%IN_ALLOC_RULE in(x) = [x : x + 1]
// ===ACC1 START===
f := d[0];
while (f != 0) {
  o[0] := f;
}
o[0] := 0;
// ===ACC1 END===
%OUT_SIZE 1
%OUT_BATCH_SIZE 1
%BATCH_MEM_OUT o
%OUT_ALLOC_RULE out(x) = [x : x + 1]
)";

} // namespace kernels
