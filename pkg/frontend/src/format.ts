/**
 * Mirror of the server's display formatting: fixed decimals, ties rounded
 * half-away-from-zero on the shortest decimal form of the double. Used by
 * UI affordances and by the e2e golden check; label TEXT itself always
 * comes from server snapshots.
 */

export function formatFixed(value: number, precision = 2): string {
  if (!Number.isFinite(value)) return "--";
  const negative = value < 0;
  const plain = toPlainDecimal(Math.abs(value));
  const rounded = roundHalfUp(plain, precision);
  const isZero = /^0(\.0*)?$/.test(rounded);
  return (negative && !isZero ? "-" : "") + rounded;
}

/** Expand JS shortest-repr (possibly exponent form) to plain decimal digits. */
function toPlainDecimal(abs: number): string {
  const s = String(abs);
  const m = /^(\d+)(?:\.(\d+))?e([+-]\d+)$/.exec(s);
  if (!m) return s;
  const intPart = m[1];
  const frac = m[2] ?? "";
  const exp = parseInt(m[3], 10);
  const digits = intPart + frac;
  const point = intPart.length + exp; // digits left of the decimal point
  if (point <= 0) return "0." + "0".repeat(-point) + digits;
  if (point >= digits.length) return digits + "0".repeat(point - digits.length);
  return digits.slice(0, point) + "." + digits.slice(point);
}

function roundHalfUp(plain: string, precision: number): string {
  let [intPart, frac = ""] = plain.split(".");
  if (frac.length <= precision) {
    frac = frac.padEnd(precision, "0");
    return precision > 0 ? `${intPart}.${frac}` : intPart;
  }
  let keep = intPart + frac.slice(0, precision);
  if (frac.charCodeAt(precision) >= 53 /* '5' */) {
    // string increment with carry
    const digits = keep.split("");
    let i = digits.length - 1;
    for (; i >= 0; i--) {
      if (digits[i] === "9") {
        digits[i] = "0";
      } else {
        digits[i] = String.fromCharCode(digits[i].charCodeAt(0) + 1);
        break;
      }
    }
    if (i < 0) digits.unshift("1");
    keep = digits.join("");
  }
  if (precision === 0) return stripLeadingZeros(keep);
  const cut = keep.length - precision;
  return `${stripLeadingZeros(keep.slice(0, cut))}.${keep.slice(cut)}`;
}

function stripLeadingZeros(s: string): string {
  const out = s.replace(/^0+(?=\d)/, "");
  return out === "" ? "0" : out;
}
