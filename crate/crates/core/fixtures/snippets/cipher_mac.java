Cipher cipher = Cipher.getInstance("AES/GCM/NoPadding");
cipher.init(Cipher.ENCRYPT_MODE, key);
byte[] ct = cipher.doFinal(data);
Mac mac = Mac.getInstance("HmacSHA256");
mac.init(macKey);
byte[] tag = mac.doFinal(ct);
