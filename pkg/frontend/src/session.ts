// Client-side session state machine over the signaling WebSocket.
//
// Mirrors the service's room machine so the UI can only offer actions
// the room would accept: no sending before the peer has joined, no
// joining twice, and so on. Frames travel as relay_frame documents
// through the signaling path because a browser cannot open the direct
// peer stream; negotiation blobs carry protocol version 2 to say so.

import {
  ANSWER,
  Doc,
  ERROR,
  ERROR_NAMES,
  ERR_NO_PEER,
  ERR_PEER_GONE,
  ERR_ROOM_FULL,
  ERR_ROOM_NOT_FOUND,
  ESTABLISHED,
  HANG_UP,
  ICE_CANDIDATE,
  OFFER,
  PEER_JOINED,
  RELAY_FRAME,
  RELAY_PROTOCOL_VERSION,
  ROOM_CREATED,
  SignalingError,
  bodyToBlob,
  bytesToHex,
  decodeNegotiation,
  encodeDoc,
  encodeNegotiation,
  msgBlob,
  msgCreateRoom,
  msgHangUp,
  msgJoinRoom,
  decodeDoc,
} from "./signaling.js";
import {
  DecodedFrame,
  FLAG_END_OF_STREAM,
  FRAME_SIZE,
  LANDMARK_COUNT,
  MeshPose,
  IDENTITY_POSE,
  WireError,
  decodeFrame,
  encodeFrame,
  pace,
} from "./wire.js";

export type SessionStatus =
  | "idle" // nothing requested yet
  | "connecting" // create/join sent, no reply
  | "waiting" // owner holds the room id, no guest yet
  | "negotiating" // peer joined, offer/answer in flight
  | "established" // both sides confirmed
  | "closed" // session over (hang-up, peer gone, end of stream)
  | "failed"; // unrecoverable (bad room, version clash, ...)

export type SessionRole = "owner" | "guest";

export interface SocketLike {
  send(text: string): void;
  close(): void;
}

export interface SessionStats {
  framesSent: number;
  framesReceived: number;
  framesDropped: number; // undecodable inbound frames
  bytesReceived: number;
  inboundRate: number | null; // bytes per second, null until measurable
}

export interface SessionEvents {
  onStatus?: (status: SessionStatus) => void;
  onRoomId?: (roomId: string) => void;
  onBanner?: (text: string) => void;
  onFrame?: (frame: DecodedFrame) => void;
  onStats?: (stats: SessionStats) => void;
}

export interface SessionOptions {
  fpsCap?: number;
  now?: () => number; // millisecond clock, injectable for tests
  randomBytes?: (n: number) => Uint8Array;
}

function defaultRandomBytes(n: number): Uint8Array {
  const out = new Uint8Array(n);
  crypto.getRandomValues(out);
  return out;
}

export class Session {
  status: SessionStatus = "idle";
  role: SessionRole | null = null;
  roomId: string | null = null;
  remoteFrame: DecodedFrame | null = null; // latest wins

  private readonly socket: SocketLike;
  private readonly events: SessionEvents;
  private readonly fpsCap: number;
  private readonly now: () => number;
  private readonly randomBytes: (n: number) => Uint8Array;

  private token: string | null = null;
  private sequence = 0;
  private lastSentMs: number | null = null;
  private peerPresent = false;

  private framesSent = 0;
  private framesReceived = 0;
  private framesDropped = 0;
  private bytesReceived = 0;
  private firstArrivalMs: number | null = null;
  private lastArrivalMs: number | null = null;

  constructor(socket: SocketLike, events: SessionEvents = {}, options: SessionOptions = {}) {
    this.socket = socket;
    this.events = events;
    this.fpsCap = options.fpsCap ?? 30;
    this.now = options.now ?? (() => Date.now());
    this.randomBytes = options.randomBytes ?? defaultRandomBytes;
  }

  stats(): SessionStats {
    let rate: number | null = null;
    if (
      this.firstArrivalMs !== null &&
      this.lastArrivalMs !== null &&
      this.lastArrivalMs > this.firstArrivalMs
    ) {
      // the first frame only starts the clock, so it is excluded
      rate = ((this.bytesReceived - FRAME_SIZE) * 1000) / (this.lastArrivalMs - this.firstArrivalMs);
    }
    return {
      framesSent: this.framesSent,
      framesReceived: this.framesReceived,
      framesDropped: this.framesDropped,
      bytesReceived: this.bytesReceived,
      inboundRate: rate,
    };
  }

  // Send controls stay locked until the peer has actually joined.
  canSend(): boolean {
    return (this.status === "negotiating" || this.status === "established") && this.peerPresent;
  }

  createRoom(): void {
    if (this.status !== "idle") throw new SignalingError(`cannot create room while ${this.status}`);
    this.role = "owner";
    this.setStatus("connecting");
    this.send(msgCreateRoom());
  }

  joinRoom(roomId: string): void {
    if (this.status !== "idle") throw new SignalingError(`cannot join room while ${this.status}`);
    this.role = "guest";
    this.roomId = roomId;
    this.setStatus("connecting");
    this.send(msgJoinRoom(roomId));
  }

  // Encode and relay one local frame, honoring the fps cap. Returns
  // true when a packet actually left.
  sendFrame(coords: Float64Array, pose: MeshPose = IDENTITY_POSE): boolean {
    if (!this.canSend()) return false;
    const nowMs = this.now();
    if (!pace(nowMs, this.lastSentMs, this.fpsCap)) return false;
    const packet = encodeFrame(coords, pose, this.sequence, nowMs);
    this.send(msgBlob(RELAY_FRAME, packet));
    this.sequence += 1;
    this.lastSentMs = nowMs;
    this.framesSent += 1;
    this.events.onStats?.(this.stats());
    return true;
  }

  // Polite shutdown: an end-of-stream frame so the peer knows the
  // avatar stopped (the room stays quiet about established hang-ups),
  // then the hang_up document.
  hangUp(): void {
    if (this.status === "idle" || this.status === "closed" || this.status === "failed") return;
    if (this.canSend()) {
      const blank = new Float64Array(LANDMARK_COUNT * 3);
      const packet = encodeFrame(blank, IDENTITY_POSE, this.sequence, this.now(), FLAG_END_OF_STREAM);
      this.send(msgBlob(RELAY_FRAME, packet));
      this.sequence += 1;
    }
    this.send(msgHangUp());
    this.setStatus("closed");
  }

  handleText(text: string): void {
    let doc: Doc;
    try {
      doc = decodeDoc(text);
    } catch (exc) {
      this.banner(`unreadable message from service: ${exc}`);
      return;
    }
    this.handleDoc(doc);
  }

  handleDoc(doc: Doc): void {
    switch (doc.type) {
      case ROOM_CREATED:
        if (this.status === "connecting" && this.role === "owner") {
          this.roomId = typeof doc.room === "string" ? doc.room : null;
          if (this.roomId) this.events.onRoomId?.(this.roomId);
          this.setStatus("waiting");
        }
        return;
      case PEER_JOINED:
        this.peerPresent = true;
        this.setStatus("negotiating");
        if (this.role === "owner") this.sendOffer();
        return;
      case OFFER:
        this.handleOffer(doc);
        return;
      case ANSWER:
        this.handleAnswer(doc);
        return;
      case ICE_CANDIDATE:
        // relay mode lists no endpoints, so candidates are ignored
        return;
      case ESTABLISHED:
        if (this.status === "negotiating") this.setStatus("established");
        return;
      case RELAY_FRAME:
        this.handleRelayFrame(doc);
        return;
      case HANG_UP:
        // the service never forwards hang_up; tolerate it anyway
        this.peerPresent = false;
        return;
      case ERROR:
        this.handleError(doc);
        return;
      default:
        this.banner(`ignoring unknown message type ${JSON.stringify(doc.type)}`);
    }
  }

  private sendOffer(): void {
    this.token = bytesToHex(this.randomBytes(16));
    const blob = encodeNegotiation({
      kind: "offer",
      token: this.token,
      endpoints: [], // nothing to dial: frames ride the relay
      version: RELAY_PROTOCOL_VERSION,
    });
    this.send(msgBlob(OFFER, blob));
  }

  private handleOffer(doc: Doc): void {
    if (this.role !== "guest" || this.status !== "negotiating") return;
    let neg;
    try {
      neg = decodeNegotiation(bodyToBlob(String(doc.body ?? "")));
    } catch (exc) {
      this.banner(`unreadable offer: ${exc}`);
      this.failAndHangUp();
      return;
    }
    if (neg.kind !== "offer") {
      this.banner(`expected an offer, got ${JSON.stringify(neg.kind)}`);
      this.failAndHangUp();
      return;
    }
    if (neg.version !== RELAY_PROTOCOL_VERSION) {
      this.banner(
        `peer speaks protocol version ${neg.version}, this client needs ${RELAY_PROTOCOL_VERSION} (relay)`,
      );
      this.failAndHangUp();
      return;
    }
    this.token = neg.token;
    const blob = encodeNegotiation({
      kind: "answer",
      token: neg.token,
      endpoints: [],
      version: RELAY_PROTOCOL_VERSION,
    });
    this.send(msgBlob(ANSWER, blob));
  }

  private handleAnswer(doc: Doc): void {
    if (this.role !== "owner" || this.status !== "negotiating") return;
    let neg;
    try {
      neg = decodeNegotiation(bodyToBlob(String(doc.body ?? "")));
    } catch (exc) {
      this.banner(`unreadable answer: ${exc}`);
      this.failAndHangUp();
      return;
    }
    if (neg.kind !== "answer") {
      this.banner(`expected an answer, got ${JSON.stringify(neg.kind)}`);
      this.failAndHangUp();
      return;
    }
    if (neg.version !== RELAY_PROTOCOL_VERSION) {
      this.banner(
        `peer speaks protocol version ${neg.version}, this client needs ${RELAY_PROTOCOL_VERSION} (relay)`,
      );
      this.failAndHangUp();
      return;
    }
    if (neg.token !== this.token) {
      this.banner("peer answered with a mismatched session token");
      this.failAndHangUp();
      return;
    }
    this.send({ type: ESTABLISHED });
    this.setStatus("established");
  }

  private handleRelayFrame(doc: Doc): void {
    let frame: DecodedFrame;
    try {
      const blob = bodyToBlob(String(doc.body ?? ""));
      frame = decodeFrame(blob);
      this.bytesReceived += blob.length;
    } catch (exc) {
      // a hostile or buggy peer must not take the session down
      if (exc instanceof WireError || exc instanceof SignalingError) {
        this.framesDropped += 1;
        this.events.onStats?.(this.stats());
        return;
      }
      throw exc;
    }
    this.framesReceived += 1;
    const nowMs = this.now();
    if (this.firstArrivalMs === null) this.firstArrivalMs = nowMs;
    this.lastArrivalMs = nowMs;
    if (frame.endOfStream) {
      this.banner("peer ended the stream");
      this.peerPresent = false; // sender is leaving, skip our own trailer
      this.hangUp();
      return;
    }
    this.remoteFrame = frame;
    this.events.onFrame?.(frame);
    this.events.onStats?.(this.stats());
  }

  private handleError(doc: Doc): void {
    const code = typeof doc.code === "number" ? doc.code : 0;
    const text = typeof doc.text === "string" && doc.text ? doc.text : ERROR_NAMES[code] ?? "error";
    this.banner(`service error ${code}: ${text}`);
    switch (code) {
      case ERR_ROOM_NOT_FOUND:
      case ERR_ROOM_FULL:
        this.setStatus("failed");
        return;
      case ERR_PEER_GONE:
        this.peerPresent = false;
        this.setStatus("closed");
        return;
      case ERR_NO_PEER:
        this.peerPresent = false;
        return;
      default:
        return; // illegal state and friends: banner only
    }
  }

  private failAndHangUp(): void {
    this.send(msgHangUp());
    this.setStatus("failed");
  }

  private send(doc: Doc): void {
    this.socket.send(encodeDoc(doc));
  }

  private setStatus(status: SessionStatus): void {
    if (this.status === status) return;
    this.status = status;
    this.events.onStatus?.(status);
  }

  private banner(text: string): void {
    this.events.onBanner?.(text);
  }
}
