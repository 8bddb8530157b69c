// Signaling wire documents: tagged JSON, canonically serialized so
// identical documents are identical bytes on every implementation.
// Also the negotiation blob format carried opaquely in offer/answer
// bodies, and the base64 body helpers.

export const CREATE_ROOM = "create_room";
export const ROOM_CREATED = "room_created";
export const JOIN_ROOM = "join_room";
export const PEER_JOINED = "peer_joined";
export const OFFER = "offer";
export const ANSWER = "answer";
export const ICE_CANDIDATE = "ice_candidate";
export const RELAY_FRAME = "relay_frame";
export const ESTABLISHED = "established";
export const HANG_UP = "hang_up";
export const ERROR = "error";

export const ERR_ROOM_NOT_FOUND = 1;
export const ERR_ROOM_FULL = 2;
export const ERR_ILLEGAL_STATE = 3;
export const ERR_NO_PEER = 4;
export const ERR_PEER_GONE = 5;

export const ERROR_NAMES: Record<number, string> = {
  [ERR_ROOM_NOT_FOUND]: "room not found",
  [ERR_ROOM_FULL]: "room full",
  [ERR_ILLEGAL_STATE]: "illegal state",
  [ERR_NO_PEER]: "no peer",
  [ERR_PEER_GONE]: "peer gone",
};

export const RELAY_FRAME_LIMIT = 4096; // decoded payload bytes

// Negotiation blobs mark which transport the sender speaks: 1 is the
// direct peer stream, 2 means frames ride the signaling relay instead
// (the only option inside a browser).
export const DIRECT_PROTOCOL_VERSION = 1;
export const RELAY_PROTOCOL_VERSION = 2;

export class SignalingError extends Error {}

export interface Doc {
  type: string;
  room?: string;
  body?: string;
  code?: number;
  text?: string;
  [key: string]: unknown;
}

function sortKeysDeep(value: unknown): unknown {
  if (Array.isArray(value)) return value.map(sortKeysDeep);
  if (value !== null && typeof value === "object") {
    const src = value as Record<string, unknown>;
    const out: Record<string, unknown> = {};
    for (const key of Object.keys(src).sort()) out[key] = sortKeysDeep(src[key]);
    return out;
  }
  return value;
}

// Canonical JSON text: sorted keys, no whitespace.
export function encodeDoc(doc: Doc): string {
  return JSON.stringify(sortKeysDeep(doc));
}

export function decodeDoc(text: string): Doc {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch (exc) {
    throw new SignalingError(`unparseable document: ${exc}`);
  }
  if (doc === null || typeof doc !== "object" || Array.isArray(doc)) {
    throw new SignalingError("document must be an object with a string 'type'");
  }
  const typed = doc as Doc;
  if (typeof typed.type !== "string") {
    throw new SignalingError("document must be an object with a string 'type'");
  }
  return typed;
}

// ---------------------------------------------------------------------------
// base64 bodies

const B64_SHAPE = /^[A-Za-z0-9+/]*={0,2}$/;

export function blobToBody(blob: Uint8Array): string {
  let binary = "";
  const chunk = 0x8000;
  for (let i = 0; i < blob.length; i += chunk) {
    binary += String.fromCharCode(...blob.subarray(i, i + chunk));
  }
  return btoa(binary);
}

export function bodyToBlob(body: string): Uint8Array {
  if (body.length % 4 !== 0 || !B64_SHAPE.test(body)) {
    throw new SignalingError("bad base64 body");
  }
  let binary: string;
  try {
    binary = atob(body);
  } catch (exc) {
    throw new SignalingError(`bad base64 body: ${exc}`);
  }
  const out = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) out[i] = binary.charCodeAt(i);
  return out;
}

// ---------------------------------------------------------------------------
// message constructors

export function msgCreateRoom(): Doc {
  return { type: CREATE_ROOM };
}

export function msgJoinRoom(roomId: string): Doc {
  return { type: JOIN_ROOM, room: roomId };
}

export function msgBlob(tag: string, blob: Uint8Array): Doc {
  return { type: tag, body: blobToBody(blob) };
}

export function msgEstablished(): Doc {
  return { type: ESTABLISHED };
}

export function msgHangUp(): Doc {
  return { type: HANG_UP };
}

// ---------------------------------------------------------------------------
// negotiation blobs (offer/answer/candidate bodies)

export type NegotiationKind = "offer" | "answer" | "candidate";

export interface Negotiation {
  kind: NegotiationKind;
  token: string; // lowercase hex
  endpoints: string[];
  version: number;
}

export function encodeNegotiation(neg: Negotiation): Uint8Array {
  const text = encodeDoc({
    endpoints: neg.endpoints,
    kind: neg.kind,
    token: neg.token,
    version: neg.version,
  } as unknown as Doc);
  return new TextEncoder().encode(text);
}

export function decodeNegotiation(blob: Uint8Array): Negotiation {
  let doc: unknown;
  try {
    doc = JSON.parse(new TextDecoder("utf-8", { fatal: true }).decode(blob));
  } catch (exc) {
    throw new SignalingError(`bad negotiation blob: ${exc}`);
  }
  const rec = doc as Record<string, unknown>;
  if (
    rec === null ||
    typeof rec !== "object" ||
    typeof rec.kind !== "string" ||
    typeof rec.token !== "string" ||
    !Array.isArray(rec.endpoints) ||
    typeof rec.version !== "number"
  ) {
    throw new SignalingError("bad negotiation blob: missing fields");
  }
  if (!/^[0-9a-f]*$/.test(rec.token) || rec.token.length % 2 !== 0) {
    throw new SignalingError("bad negotiation blob: token is not hex");
  }
  return {
    kind: rec.kind as NegotiationKind,
    token: rec.token,
    endpoints: rec.endpoints.map(String),
    version: rec.version,
  };
}

export function bytesToHex(bytes: Uint8Array): string {
  return Array.from(bytes, (b) => b.toString(16).padStart(2, "0")).join("");
}
